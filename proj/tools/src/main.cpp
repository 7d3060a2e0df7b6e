#include "eitbin_cli/commands.hpp"

#include "eitbin/log.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace eitbin::cli;

int main(int argc, char** argv) {
    CLI::App app{"Binary EIT reconstruction from sample-based blends"};
    app.require_subcommand(1);

    GlobalOptions global;
    std::uint64_t seed = 0;
    std::string output;
    int threads = 0;
    bool quiet = false;
    bool verbose = false;
    app.add_option("--config", global.config_path, "run configuration (key = value lines)");
    auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
    auto* output_opt = app.add_option("--output", output, "override the output directory");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (default: $EITBIN_THREADS)");
    app.add_flag("--quiet", quiet, "suppress warnings on stderr");
    app.add_flag("--verbose", verbose, "print progress notes on stderr");

    auto* gen = app.add_subcommand("gen-samples", "Step 0: generate and simulate a sample collection");
    auto* rec = app.add_subcommand("reconstruct", "run Steps 0-3 and write the artifact directory");

    KappaCommand kappa;
    bool scaled = false;
    auto* kap = app.add_subcommand("kappa", "gradient consistency test for one control family");
    kap->add_option("family", kappa.family, "alpha, P or zeta")->required();
    kap->add_option("--gradient-scale", kappa.gradient_scale, "multiply the gradient (plateau moves to 1/scale)");
    kap->add_flag("--scaled-gradient", scaled, "self-test: doubled gradient, plateau at 0.5");
    kap->add_option("--direction", kappa.direction_index, "index of the random direction");

    RenderCommand render;
    auto* ren = app.add_subcommand("render", "write a field as a plain PGM image plus legend");
    ren->add_option("field", render.field_path, "field file, one value per element")->required();
    ren->add_option("mesh", render.mesh_path, "mesh file")->required();
    ren->add_option("image", render.image_path, "output .pgm path")->required();
    ren->add_option("--size", render.size, "image width and height in pixels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    if (*seed_opt) global.seed = seed;
    if (*output_opt) global.output = output;
    if (*threads_opt) global.threads = threads;
    if (quiet) eitbin::log::set_level(eitbin::log::Level::quiet);
    if (verbose) eitbin::log::set_level(eitbin::log::Level::info);
    if (scaled) kappa.gradient_scale = 2.0;

    return guarded(std::cerr, [&] {
        if (*gen) return cmd_gen_samples(global, std::cout, std::cerr);
        if (*rec) return cmd_reconstruct(global, std::cout, std::cerr);
        if (*kap) return cmd_kappa(global, kappa, std::cout, std::cerr);
        return cmd_render(render, std::cout, std::cerr);
    });
}
