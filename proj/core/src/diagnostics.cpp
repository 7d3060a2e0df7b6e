#include "eitbin/diagnostics.hpp"

#include "eitbin/errors.hpp"
#include "eitbin/pipeline.hpp"
#include "eitbin/rng.hpp"

#include <cmath>
#include <limits>

namespace eitbin {

KappaFamily parse_kappa_family(const std::string& name) {
    if (name == "alpha") return KappaFamily::alpha;
    if (name == "P" || name == "geometry") return KappaFamily::geometry;
    if (name == "zeta") return KappaFamily::zeta;
    throw DomainError("unknown kappa family '" + name + "' (expected alpha, P or zeta)");
}

std::string kappa_family_name(KappaFamily family) {
    switch (family) {
        case KappaFamily::alpha: return "alpha";
        case KappaFamily::geometry: return "P";
        case KappaFamily::zeta: return "zeta";
    }
    return "?";
}

namespace {

std::vector<double> random_direction(Rng& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> d(n);
    for (double& v : d) v = u(rng);
    return d;
}

void normalize_max(std::vector<double>& d) {
    double m = 0.0;
    for (double v : d) m = std::max(m, std::abs(v));
    if (m == 0.0) throw DegenerateDirectionError("kappa: perturbation direction is zero");
    for (double& v : d) v /= m;
}

// Trial points outside the admissible set have no cost.
template <class F>
double guarded(F&& f) {
    try {
        return f();
    } catch (const DomainError&) {
        return std::numeric_limits<double>::quiet_NaN();
    } catch (const SolverError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

KappaRun run_kappa(const RunConfig& config, KappaFamily family, const KappaOptions& options) {
    const auto setup = build_problem(config);
    const Mesh& mesh = setup->mesh;
    const SampleCollection collection = obtain_collection(config, *setup, options.threads);
    const Ranking ranking = rank_and_select(collection, setup->target, config.optimizer.n_s, mesh.radius);
    const ConductivityPair levels = collection.levels;
    const FineControl& control = ranking.control;

    CostEvaluator eval(setup->problem());
    Rng rng = substream(config.seed, "directions", options.direction_index);
    KappaRun run;
    std::function<double(double)> cost_along;

    std::vector<ConductivityField> fields;
    for (const auto& s : control.basis) fields.push_back(rasterize_sample(mesh, s, levels.high, levels.low));
    const ConductivityField step1 = weighted_sum(fields, control.alpha);

    switch (family) {
        case KappaFamily::alpha: {
            run.base_cost = eval.evaluate(step1);
            run.gradient = grad_alpha(fields, eval.gradient_at_last());
            run.direction = random_direction(rng, control.alpha.size());
            double mean = 0.0;
            for (double v : run.direction) mean += v / static_cast<double>(run.direction.size());
            for (double& v : run.direction) v -= mean;
            normalize_max(run.direction);
            cost_along = [&](double eps) {
                std::vector<double> a(control.alpha);
                for (std::size_t i = 0; i < a.size(); ++i) a[i] += eps * run.direction[i];
                return guarded([&] { return eval.evaluate(weighted_sum(fields, a)); });
            };
            break;
        }
        case KappaFamily::geometry: {
            run.base_cost = eval.evaluate(step1);
            run.gradient =
                grad_P(mesh, control.blend_control(), levels, eval.gradient_at_last(), config.optimizer.delta_p);
            run.direction = random_direction(rng, run.gradient.size());
            // Radii only grow, so large eps stays admissible.
            for (std::size_t i = 2; i < run.direction.size(); i += 3) run.direction[i] = 0.5 * (run.direction[i] + 1.0);
            normalize_max(run.direction);
            cost_along = [&, p0 = control.geometry()](double eps) {
                FineControl trial = control;
                std::vector<double> p(p0);
                for (std::size_t i = 0; i < p.size(); ++i) p[i] += eps * run.direction[i];
                trial.set_geometry(p);
                for (const auto& s : trial.basis) {
                    for (const auto& c : s.circles) {
                        if (!(c.r > 0.0)) return std::numeric_limits<double>::quiet_NaN();
                    }
                }
                return guarded([&] { return eval.evaluate(blend(mesh, trial.blend_control(), levels.high, levels.low)); });
            };
            break;
        }
        case KappaFamily::zeta: {
            auto [zeta, partition] = initial_coarse_state(mesh, step1, config.optimizer.n_max);
            const CoarseBounds bounds = coarse_bounds(step1);
            project_admissible(zeta, bounds);
            run.base_cost = eval.evaluate(coarse_field(partition, zeta));
            const SpatialGradient g = eval.gradient_at_last();
            const auto cost_at = [&](const CoarseControl& trial) {
                return eval.evaluate(coarse_field(partition_field(mesh, step1, trial, &partition), trial));
            };
            run.gradient = grad_zeta(partition, g, zeta, bounds, run.base_cost, cost_at, {config.optimizer.delta_zeta});
            // Thresholds only act through the partition; the test moves values.
            const std::size_t nv = static_cast<std::size_t>(zeta.n_max()) + 1;
            run.direction = random_direction(rng, run.gradient.size());
            for (std::size_t i = nv; i < run.direction.size(); ++i) run.direction[i] = 0.0;
            normalize_max(run.direction);
            cost_along = [&, zeta = zeta, partition = partition](double eps) {
                CoarseControl trial = zeta;
                auto v = trial.values();
                for (std::size_t i = 0; i < v.size(); ++i) v[i] += eps * run.direction[i];
                return guarded([&] { return eval.evaluate(coarse_field(partition, trial)); });
            };
            break;
        }
    }
    for (double& v : run.gradient) v *= options.gradient_scale;
    run.report = kappa_test(cost_along, run.gradient, run.direction, default_kappa_epsilons());
    return run;
}

}  // namespace eitbin
