#include "eitbin/pipeline.hpp"

#include "eitbin/errors.hpp"
#include "eitbin/log.hpp"
#include "eitbin/rng.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>

namespace eitbin {

EitProblem ProblemSetup::problem() const {
    return {&mesh, &layout, &scheme, &target, truth ? &*truth : nullptr};
}

std::unique_ptr<ProblemSetup> build_problem(const RunConfig& config) {
    validate_config(config);
    auto s = std::make_unique<ProblemSetup>();
    s->mesh = build_disc_mesh(config.mesh.radius, config.mesh.target_elements);
    s->layout = place_electrodes(s->mesh, config.electrodes.count, config.electrodes.half_width,
                                 config.electrodes.impedance);
    s->scheme = ExcitationScheme(config.base_pattern);

    const auto& model = config.model;
    if (!model.measurement_file.empty()) {
        s->target = load_measurements(model.measurement_file);
        if (s->target.size() != s->scheme.size()) {
            throw ConfigError("model.measurement_file", "matrix size does not match electrodes.count");
        }
        return s;
    }
    if (!model.circles.empty()) {
        s->truth = make_true_model(s->mesh, model.circles, model.sigma_c, model.sigma_h);
    } else {
        s->truth = make_true_model_from_mask(s->mesh, load_mask(model.mask_file), model.sigma_c, model.sigma_h,
                                             model.mask_values);
    }
    s->target = simulate_measurements(s->mesh, s->layout, *s->truth, s->scheme);
    if (config.noise_level > 0.0) {
        Rng rng = substream(config.seed, "noise");
        s->target = add_noise(s->target, config.noise_level, rng);
    }
    return s;
}

SampleCollection obtain_collection(const RunConfig& config, const ProblemSetup& setup, int threads,
                                   bool* generated) {
    const ConductivityPair levels{config.collection.sigma_c, config.collection.sigma_h};
    if (!config.collection.file.empty()) {
        if (generated) *generated = false;
        auto coll = load_collection(config.collection.file, config.collection.data_file, levels);
        for (const auto& d : coll.data) {
            if (d.size() != setup.scheme.size()) {
                throw ConfigError("collection.data_file", "rows do not hold electrodes.count^2 currents");
            }
        }
        return coll;
    }
    if (generated) *generated = true;
    CollectionParams params;
    params.nc_max = config.collection.nc_max;
    params.r_max_fraction = config.collection.r_max_fraction;
    params.levels = levels;
    params.seed = config.seed;
    params.threads = threads;
    return precompute_collection(setup.mesh, setup.layout, setup.scheme, config.collection.size, params);
}

FineSettings fine_settings(const RunConfig& config) {
    FineSettings s;
    s.method = config.optimizer.method == "coordinate-descent" ? FineMethod::coordinate_descent
                                                                : FineMethod::projected_gradient;
    s.tolerance = config.optimizer.tolerance;
    s.max_cost_evals = config.optimizer.max_cost_evals;
    s.delta_p = config.optimizer.delta_p;
    return s;
}

CoarseSettings coarse_settings(const RunConfig& config) {
    CoarseSettings s;
    s.tolerance = config.optimizer.tolerance;
    s.max_cost_evals = config.optimizer.coarse_max_cost_evals;
    s.delta_zeta = config.optimizer.delta_zeta;
    return s;
}

namespace {

template <class F>
auto in_step(const char* step, F&& f) {
    try {
        return f();
    } catch (const SolverError& e) {
        throw SolverError(std::string(step) + ": " + e.what());
    }
}

template <class W>
void write_file(const std::filesystem::path& path, W&& writer) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    writer(out);
    if (!out) throw IoError("failed writing " + path.string());
}

void write_outcome(std::ostream& out, const char* name, const StepOutcome& o) {
    out << name << ".iterations = " << o.iterations << '\n'
        << name << ".initial_cost = " << o.initial_cost << '\n'
        << name << ".final_cost = " << o.final_cost << '\n'
        << name << ".stalled = " << (o.stalled ? "true" : "false") << '\n'
        << name << ".stop_reason = " << o.stop_reason << '\n';
}

void write_artifacts(const RunConfig& config, const PipelineResult& r, const SampleCollection* generated) {
    namespace fs = std::filesystem;
    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const ProblemSetup& s = *r.setup;

    save_mesh((dir / "mesh.txt").string(), s.mesh);
    save_measurements((dir / "measurements.csv").string(), s.target);
    if (s.truth) save_field((dir / "sigma_true.txt").string(), *s.truth);
    save_field((dir / "sigma_step1.txt").string(), r.step1);
    save_field((dir / "sigma_fine.txt").string(), r.fine.sigma);
    save_field((dir / "sigma_binary.txt").string(), r.coarse.sigma);
    write_file(dir / "partition.txt", [&](std::ostream& out) {
        for (int label : r.coarse.partition.region_of_element) out << label << '\n';
    });
    write_file(dir / "trace.csv", [&](std::ostream& out) { r.trace.write_csv(out); });
    write_file(dir / "zeta.txt", [&](std::ostream& out) {
        const auto& z = r.coarse.zeta;
        out << std::setprecision(17) << "low = " << z.low() << '\n';
        for (int n = 1; n <= z.n_max(); ++n) out << "high_" << n << " = " << z.high(n) << '\n';
        for (int n = 1; n <= z.n_max(); ++n) out << "threshold_" << n << " = " << z.threshold(n) << '\n';
    });
    write_file(dir / "basis.txt", [&](std::ostream& out) { write_basis(out, r.fine.control); });
    write_file(dir / "config.txt", [&](std::ostream& out) {
        RunConfig copy = config;
        copy.output_dir = ".";
        copy.threads = 0;
        write_config(out, copy);
    });
    write_file(dir / "summary.txt", [&](std::ostream& out) {
        out << std::setprecision(17);
        out << "step1.cost = " << r.step1_cost << '\n';
        write_outcome(out, "step2", r.fine.outcome);
        write_outcome(out, "step3", r.coarse.outcome);
        out << "cost_evals = " << r.cost_evals << '\n';
        if (s.truth) {
            out << "l2_error.step1 = " << l2_error(s.mesh, r.step1, *s.truth) << '\n'
                << "l2_error.step2 = " << l2_error(s.mesh, r.fine.sigma, *s.truth) << '\n'
                << "l2_error.step3 = " << l2_error(s.mesh, r.coarse.sigma, *s.truth) << '\n';
        }
    });
    if (generated) {
        save_collection((dir / "collection_samples.txt").string(), (dir / "collection_data.csv").string(),
                        *generated);
    }
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config, const PipelineOptions& options) {
    PipelineResult r;
    r.setup = in_step("setup", [&] { return build_problem(config); });
    const ProblemSetup& s = *r.setup;

    const SampleCollection collection =
        in_step("step 0", [&] { return obtain_collection(config, s, options.threads, &r.collection_generated); });
    if (collection.samples.size() < static_cast<std::size_t>(10) * config.optimizer.n_s) {
        throw ConfigError("optimizer.n_s", "the collection must hold at least 10 * n_s samples");
    }
    if (r.collection_generated) r.trace.add({0, "step0", std::nullopt, 0, std::nullopt});

    CostEvaluator evaluator(s.problem(), &r.trace);
    r.ranking = rank_and_select(collection, s.target, config.optimizer.n_s, s.mesh.radius);
    r.step1 = blend(s.mesh, r.ranking.control.blend_control(), collection.levels.high, collection.levels.low);
    r.step1_cost = in_step("step 1", [&] { return evaluator.evaluate(r.step1); });
    r.trace.add({0, "step1", r.step1_cost, evaluator.evaluations(), evaluator.l2_error(r.step1)});

    r.fine = in_step("step 2", [&] {
        return optimize_fine(evaluator, collection.levels, r.ranking.control, fine_settings(config), r.trace);
    });
    if (r.fine.outcome.stalled) log::warn("step 2 stalled: " + r.fine.outcome.stop_reason);

    r.coarse = in_step("step 3", [&] {
        return optimize_coarse(evaluator, r.fine.sigma, config.optimizer.n_max, coarse_settings(config), r.trace);
    });
    if (r.coarse.outcome.stalled) log::warn("step 3 stalled: " + r.coarse.outcome.stop_reason);
    r.cost_evals = evaluator.evaluations();

    if (options.write_artifacts) write_artifacts(config, r, r.collection_generated ? &collection : nullptr);
    return r;
}

}  // namespace eitbin
