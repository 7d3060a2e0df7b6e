#include "eitbin_cli/commands.hpp"

#include "eitbin/diagnostics.hpp"
#include "eitbin/errors.hpp"
#include "eitbin/pipeline.hpp"

#include <chrono>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>

namespace eitbin::cli {

int resolve_threads(std::optional<int> flag, int config_threads) {
    if (flag) {
        if (*flag < 1) throw ConfigError("--threads", "must be at least 1");
        return *flag;
    }
    if (const char* env = std::getenv(threads_env); env && *env) {
        const std::string text(env);
        int n = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), n);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size() || n < 1) {
            throw ConfigError(threads_env, "expected a positive integer, got '" + text + "'");
        }
        return n;
    }
    if (config_threads > 0) return config_threads;
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

RunConfig load_run_config(const GlobalOptions& options) {
    RunConfig config;
    if (options.config_path.empty()) {
        config.model.circles = model1_circles();
    } else {
        config = load_config(options.config_path);
    }
    if (options.seed) config.seed = *options.seed;
    if (options.output) config.output_dir = *options.output;
    validate_config(config);
    return config;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return exit_io;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << '\n';
        return exit_solver;
    } catch (const DegenerateDirectionError& e) {
        err << "degenerate direction: " << e.what() << '\n';
        return exit_degenerate;
    } catch (const DomainError& e) {
        err << "invalid input: " << e.what() << '\n';
        return exit_config;
    } catch (const ConstraintError& e) {
        err << "invalid input: " << e.what() << '\n';
        return exit_config;
    } catch (const LayoutError& e) {
        err << "invalid electrode layout: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

namespace {

std::filesystem::path prepare_output(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
    return p;
}

}  // namespace

int cmd_gen_samples(const GlobalOptions& options, std::ostream& out, std::ostream&) {
    const RunConfig config = load_run_config(options);
    const int threads = resolve_threads(options.threads, config.threads);
    const auto t0 = std::chrono::steady_clock::now();

    const Mesh mesh = build_disc_mesh(config.mesh.radius, config.mesh.target_elements);
    const ElectrodeLayout layout =
        place_electrodes(mesh, config.electrodes.count, config.electrodes.half_width, config.electrodes.impedance);
    const ExcitationScheme scheme(config.base_pattern);
    CollectionParams params;
    params.nc_max = config.collection.nc_max;
    params.r_max_fraction = config.collection.r_max_fraction;
    params.levels = {config.collection.sigma_c, config.collection.sigma_h};
    params.seed = config.seed;
    params.threads = threads;
    const auto collection = precompute_collection(mesh, layout, scheme, config.collection.size, params);

    const auto dir = prepare_output(config.output_dir);
    const auto samples = dir / "collection_samples.txt";
    const auto data = dir / "collection_data.csv";
    save_collection(samples.string(), data.string(), collection);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << "generated " << collection.samples.size() << " samples in " << std::fixed << std::setprecision(2)
        << seconds << " s -> " << samples.string() << ", " << data.string() << '\n';
    return exit_ok;
}

int cmd_reconstruct(const GlobalOptions& options, std::ostream& out, std::ostream&) {
    const RunConfig config = load_run_config(options);
    PipelineOptions popts;
    popts.threads = resolve_threads(options.threads, config.threads);
    const PipelineResult r = run_pipeline(config, popts);
    out << std::setprecision(6) << "final cost " << r.coarse.outcome.final_cost << " (step 2 "
        << r.fine.outcome.final_cost << ", step 1 " << r.step1_cost << "); cost evaluations " << r.cost_evals;
    if (r.setup->truth) out << "; l2 error " << l2_error(r.setup->mesh, r.coarse.sigma, *r.setup->truth);
    out << "; artifacts in " << config.output_dir << '\n';
    return exit_ok;
}

int cmd_kappa(const GlobalOptions& options, const KappaCommand& command, std::ostream& out, std::ostream&) {
    const RunConfig config = load_run_config(options);
    const KappaFamily family = parse_kappa_family(command.family);
    KappaOptions kopts;
    kopts.gradient_scale = command.gradient_scale;
    kopts.direction_index = command.direction_index;
    kopts.threads = resolve_threads(options.threads, config.threads);
    const KappaRun run = run_kappa(config, family, kopts);

    const auto dir = prepare_output(config.output_dir);
    const auto path = dir / ("kappa_" + kappa_family_name(family) + ".csv");
    std::ofstream file(path);
    if (!file) throw IoError("cannot write " + path.string());
    write_kappa_csv(file, run.report);
    if (!file) throw IoError("failed writing " + path.string());

    // With a scaled gradient the plateau sits at 1 / scale.
    KappaReport rescaled = run.report;
    for (double& k : rescaled.kappa) k *= command.gradient_scale;
    const double tol = family == KappaFamily::geometry ? 1e-2 : 1e-4;
    const auto [first, last] = kappa_plateau(rescaled, tol);
    const double expected = 1.0 / command.gradient_scale;
    out << "kappa " << kappa_family_name(family) << ": ";
    if (first < 0) {
        out << "no entry within relative " << tol << " of " << expected;
    } else {
        out << "kappa within relative " << tol << " of " << expected << " for eps in ["
            << run.report.epsilons[last] << ", " << run.report.epsilons[first] << "]";
    }
    out << " -> " << path.string() << '\n';
    return exit_ok;
}

}  // namespace eitbin::cli
