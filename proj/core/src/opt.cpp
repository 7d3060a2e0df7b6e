#include "eitbin/opt.hpp"

#include "eitbin/errors.hpp"
#include "eitbin/log.hpp"
#include "eitbin/rng.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <deque>
#include <exception>
#include <functional>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

namespace eitbin {

std::optional<long> RunTrace::evaluations_to_reach(double level) const {
    for (std::size_t i = 0; i < best_history_.size(); ++i) {
        if (best_history_[i] <= level) return static_cast<long>(i + 1);
    }
    return std::nullopt;
}

void RunTrace::write_csv(std::ostream& out) const {
    out << "iter,phase,cost,cost_evals,l2_error\n" << std::setprecision(17);
    for (const auto& r : rows_) {
        out << r.iter << ',' << r.phase << ',';
        if (r.cost) out << *r.cost;
        out << ',' << r.cost_evals << ',';
        if (r.l2_error) out << *r.l2_error;
        out << '\n';
    }
}

CostEvaluator::CostEvaluator(const EitProblem& problem, RunTrace* trace)
    : problem_(problem), trace_(trace), solver_(*problem.mesh, *problem.layout) {
    if (!problem.mesh || !problem.layout || !problem.scheme || !problem.target) {
        throw DomainError("CostEvaluator: incomplete problem");
    }
    if (problem.target->size() != problem.scheme->size()) {
        throw DomainError("CostEvaluator: target size does not match the excitation scheme");
    }
    for (double v : problem.target->values()) target_energy_ += v * v;
}

double CostEvaluator::evaluate(const ConductivityField& sigma) {
    last_sigma_ = ConductivityField();
    solver_.set_conductivity(sigma);
    last_forward_ = simulate(solver_, *problem_.scheme);
    ++simulations_;
    const double j = cost(last_forward_.currents, *problem_.target);
    ++evaluations_;
    last_sigma_ = sigma;
    if (evaluations_ == 1 || j < best_) best_ = j;
    if (trace_) trace_->best_history().push_back(best_);
    return j;
}

SpatialGradient CostEvaluator::gradient_at_last() const {
    if (last_sigma_.size() == 0) throw SolverError("gradient requested without a successful evaluation");
    const auto adjoints = solve_adjoints(solver_, *problem_.scheme, last_forward_, *problem_.target);
    return spatial_gradient(*problem_.mesh, last_sigma_, last_forward_.potentials, adjoints);
}

std::optional<double> CostEvaluator::l2_error(const ConductivityField& sigma) const {
    if (!problem_.truth) return std::nullopt;
    return eitbin::l2_error(*problem_.mesh, sigma, *problem_.truth);
}

bool relative_decrease_converged(double previous, double current, double tol) {
    if (current == 0.0) return true;
    return std::abs(current - previous) / std::abs(current) < tol;
}

std::vector<double> project_simplex(std::span<const double> v) {
    if (v.empty()) throw DomainError("project_simplex: empty vector");
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumulative += u[j];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    std::vector<double> w(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        w[i] = std::max(v[i] - theta, 0.0);
        sum += w[i];
    }
    for (double& x : w) x = std::min(x / sum, 1.0);
    return w;
}

FineBounds default_fine_bounds(double domain_radius) {
    return {domain_radius, 1e-3 * domain_radius, domain_radius, 2.0 * domain_radius};
}

std::size_t FineControl::geometry_size() const { return geometry_parameter_count(blend_control()); }

std::vector<double> FineControl::geometry() const {
    std::vector<double> p;
    p.reserve(geometry_size());
    for (const auto& s : basis) {
        for (const auto& c : s.circles) {
            p.push_back(c.x);
            p.push_back(c.y);
            p.push_back(c.r);
        }
    }
    return p;
}

void FineControl::set_geometry(std::span<const double> params) {
    if (params.size() != geometry_size()) throw DomainError("set_geometry: parameter count mismatch");
    std::size_t k = 0;
    for (auto& s : basis) {
        for (auto& c : s.circles) {
            c.x = params[k++];
            c.y = params[k++];
            c.r = params[k++];
        }
    }
}

void FineControl::project_geometry() {
    for (auto& s : basis) {
        for (auto& c : s.circles) {
            c.r = std::clamp(c.r, bounds.r_min, bounds.r_max);
            c.x = std::clamp(c.x, -bounds.center_limit, bounds.center_limit);
            c.y = std::clamp(c.y, -bounds.center_limit, bounds.center_limit);
            const double limit = (bounds.domain_radius + c.r) * (1.0 - 1e-9);
            const double d = std::hypot(c.x, c.y);
            if (d >= limit) {
                c.x *= limit / d;
                c.y *= limit / d;
            }
        }
    }
}

void write_basis(std::ostream& out, const FineControl& control) {
    out << std::setprecision(17);
    for (std::size_t i = 0; i < control.basis.size(); ++i) {
        out << control.alpha[i] << ' ' << control.basis[i].circles.size();
        for (const auto& c : control.basis[i].circles) out << ' ' << c.x << ' ' << c.y << ' ' << c.r;
        out << '\n';
    }
}

SampleCollection precompute_collection(const Mesh& mesh, const ElectrodeLayout& layout,
                                       const ExcitationScheme& scheme, int count, const CollectionParams& params) {
    if (count < 1) throw DomainError("collection size must be at least 1");
    SampleCollection coll;
    coll.levels = params.levels;
    coll.samples.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng = substream(params.seed, "collection", static_cast<std::uint64_t>(i));
        coll.samples.push_back(sample_random(rng, mesh.radius, params.nc_max, params.r_max_fraction));
    }
    coll.data.assign(count, MeasurementSet(scheme.size()));

    const int threads = std::clamp(params.threads, 1, count);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        try {
            ForwardSolver solver(mesh, layout);
            for (int i = next++; i < count; i = next++) {
                solver.set_conductivity(
                    rasterize_sample(mesh, coll.samples[i], params.levels.high, params.levels.low));
                coll.data[i] = simulate(solver, scheme).currents;
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = count;
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return coll;
}

Ranking rank_and_select(const SampleCollection& collection, const MeasurementSet& target, int n_s,
                        double domain_radius) {
    const std::size_t n = collection.samples.size();
    if (collection.data.size() != n) throw DomainError("rank_and_select: collection has no simulated data");
    if (n_s < 1 || static_cast<std::size_t>(n_s) > n) {
        throw DomainError("rank_and_select: need 1 <= n_s <= collection size");
    }
    std::vector<double> costs(n);
    for (std::size_t i = 0; i < n; ++i) costs[i] = cost(collection.data[i], target);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });

    Ranking r;
    r.control.bounds = default_fine_bounds(domain_radius);
    for (int i = 0; i < n_s; ++i) {
        r.order.push_back(order[i]);
        r.costs.push_back(costs[order[i]]);
        r.control.basis.push_back(collection.samples[order[i]]);
        r.control.alpha.push_back(1.0 / n_s);
    }
    return r;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double inf_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

/// Negative gradient restricted to the face of the simplex that stays
/// feasible: weights at zero whose reduced gradient points outward are frozen.
std::vector<double> simplex_descent_direction(std::span<const double> alpha, std::span<const double> g) {
    std::vector<bool> free(alpha.size(), true);
    std::vector<double> d(alpha.size(), 0.0);
    for (bool changed = true; changed;) {
        changed = false;
        double sum = 0.0;
        int count = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (free[i]) {
                sum += g[i];
                ++count;
            }
        }
        const double mean = count ? sum / count : 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            d[i] = free[i] ? -(g[i] - mean) : 0.0;
            if (free[i] && alpha[i] <= 1e-14 && d[i] < 0.0) {
                free[i] = false;
                changed = true;
            }
        }
    }
    return d;
}

/// Budget and bookkeeping shared by both step drivers.
struct StepContext {
    CostEvaluator& eval;
    RunTrace& trace;
    std::string phase;
    long start;
    long budget;
    double floor;

    bool exhausted() const { return eval.evaluations() - start >= budget; }
    void record(int iter, double cost, const ConductivityField& sigma) {
        trace.add({iter, phase, cost, eval.evaluations(), eval.l2_error(sigma)});
    }
    /// Final row with the returned cost, when evaluations followed the last row.
    void close(const StepOutcome& out, const ConductivityField& sigma) {
        if (trace.rows().empty() || trace.rows().back().cost_evals != eval.evaluations()) {
            record(out.iterations, out.final_cost, sigma);
        }
    }
};

struct FineState {
    FineControl control;
    std::vector<ConductivityField> fields;
    ConductivityField sigma;
};

FineState make_fine_state(const Mesh& mesh, ConductivityPair levels, FineControl control,
                          const FineState* reuse = nullptr) {
    FineState s;
    s.fields.reserve(control.basis.size());
    for (std::size_t i = 0; i < control.basis.size(); ++i) {
        if (reuse && reuse->control.basis[i] == control.basis[i]) {
            s.fields.push_back(reuse->fields[i]);
        } else {
            s.fields.push_back(rasterize_sample(mesh, control.basis[i], levels.high, levels.low));
        }
    }
    s.sigma = weighted_sum(s.fields, control.alpha);
    s.control = std::move(control);
    return s;
}

/// Stops and records the reason when a termination test fires.
bool should_stop(StepOutcome& out, const StepContext& ctx, double previous, double current, double tol) {
    if (current <= ctx.floor) {
        out.stop_reason = "cost at round-off floor";
        return true;
    }
    if (relative_decrease_converged(previous, current, tol)) {
        out.stop_reason = "converged";
        return true;
    }
    if (ctx.exhausted()) {
        out.stop_reason = "evaluation budget exhausted";
        return true;
    }
    return false;
}

FineResult fine_projected_gradient(StepContext& ctx, ConductivityPair levels, FineState state,
                                   const FineSettings& settings) {
    const Mesh& mesh = *ctx.eval.problem().mesh;
    FineResult result;
    StepOutcome& out = result.outcome;
    double j = ctx.eval.evaluate(state.sigma);
    out.initial_cost = j;
    ctx.record(0, j, state.sigma);

    // Step memory per block: joint, weights only, geometry only.
    std::array<double, 3> t_mem{1.0, 1.0, 1.0};
    struct StepHistory {
        std::vector<double> alpha, ga, p, gp;
    };
    std::optional<StepHistory> history;
    // The gradient comes from the evaluator's last solve; a rejected trial
    // after the last accepted one forces a re-solve at the iterate.
    bool last_is_state = true;
    std::deque<double> recent{j};
    FineState best = state;
    double best_j = j;
    int iter = 0;
    if (j <= ctx.floor) out.stop_reason = "cost at round-off floor";
    while (out.stop_reason.empty()) {
        if (ctx.exhausted()) {
            out.stop_reason = "evaluation budget exhausted";
            break;
        }
        if (!last_is_state) {
            ctx.eval.evaluate(state.sigma);
            last_is_state = true;
            if (ctx.exhausted()) {
                out.stop_reason = "evaluation budget exhausted";
                break;
            }
        }
        const SpatialGradient g = ctx.eval.gradient_at_last();
        const auto ga = grad_alpha(state.fields, g);
        const auto gp = grad_P(mesh, state.control.blend_control(), levels, g, settings.delta_p);

        // Sample i's geometry enters the cost through alpha_i * sample_i, so its
        // gradient scales with alpha_i and its curvature with alpha_i^2.
        // Dividing by alpha_i evens out the blocks.
        std::vector<double> gs(gp.size(), 0.0), w(gp.size(), 0.0);
        for (std::size_t i = 0, k = 0; i < state.control.basis.size(); ++i) {
            const double a = state.control.alpha[i];
            for (std::size_t c = 0; c < 3 * state.control.basis[i].circles.size(); ++c, ++k) {
                gs[k] = a > 1e-14 ? gp[k] / a : 0.0;
                w[k] = a;
            }
        }
        auto p0 = state.control.geometry();
        const double sp = settings.geometry_step * mesh.radius;

        // Barzilai-Borwein lengths per block from the last accepted step, in
        // the metric matching the scaling above; capped by the max-norm limits.
        std::optional<double> lambda_a, lambda_p;
        if (history) {
            double ss = 0.0, sy = 0.0;
            for (std::size_t i = 0; i < ga.size(); ++i) {
                const double s = state.control.alpha[i] - history->alpha[i];
                ss += s * s;
                sy += s * (ga[i] - history->ga[i]);
            }
            if (ss > 0.0 && sy > 0.0) lambda_a = ss / sy;
            if (history->p.size() == p0.size()) {
                ss = sy = 0.0;
                for (std::size_t i = 0; i < p0.size(); ++i) {
                    const double s = p0[i] - history->p[i];
                    ss += w[i] * s * s;
                    sy += s * (gp[i] - history->gp[i]);
                }
                if (ss > 0.0 && sy > 0.0) lambda_p = ss / sy;
            }
        }
        std::vector<double> da(ga.size(), 0.0);
        if (lambda_a) {
            std::vector<double> a(state.control.alpha);
            for (std::size_t i = 0; i < a.size(); ++i) a[i] -= *lambda_a * ga[i];
            a = project_simplex(a);
            for (std::size_t i = 0; i < a.size(); ++i) da[i] = a[i] - state.control.alpha[i];
        } else {
            da = simplex_descent_direction(state.control.alpha, ga);
        }
        const double na_raw = inf_norm(da);
        if (!lambda_a || na_raw > settings.weight_step) {
            for (double& v : da) v = (na_raw > 0.0) ? v * settings.weight_step / na_raw : 0.0;
        }
        const double na = inf_norm(da);

        std::vector<double> dp(gp.size());
        const double np = inf_norm(gs);
        auto full_geometry_direction = [&] {
            const double scale = (lambda_p && *lambda_p * np <= sp) ? *lambda_p : (np > 0.0 ? sp / np : 0.0);
            for (std::size_t i = 0; i < gs.size(); ++i) dp[i] = -gs[i] * scale;
        };
        full_geometry_direction();
        history = StepHistory{state.control.alpha, ga, p0, gp};

        std::optional<FineState> accepted;
        double geometry_move = 0.0;
        double j_new = j;
        const double reference = *std::max_element(recent.begin(), recent.end());
        auto line_search = [&](int block, bool use_alpha, bool use_p) {
            if ((!use_alpha || na == 0.0) && (!use_p || np == 0.0)) return false;
            double tt = block == 0 ? 1.0 : t_mem[block];
            for (int b = 0; b <= settings.max_backtracks; ++b, tt *= 0.5) {
                if (ctx.exhausted()) return false;
                FineControl trial = state.control;
                if (use_alpha) {
                    std::vector<double> a(trial.alpha);
                    for (std::size_t i = 0; i < a.size(); ++i) a[i] += tt * da[i];
                    trial.alpha = project_simplex(a);
                }
                if (use_p) {
                    std::vector<double> p(p0);
                    for (std::size_t i = 0; i < p.size(); ++i) p[i] += tt * dp[i];
                    trial.set_geometry(p);
                    trial.project_geometry();
                }
                std::vector<double> step_a(ga.size()), step_p(gp.size());
                for (std::size_t i = 0; i < ga.size(); ++i) step_a[i] = trial.alpha[i] - state.control.alpha[i];
                const auto p1 = trial.geometry();
                for (std::size_t i = 0; i < gp.size(); ++i) step_p[i] = p1[i] - p0[i];
                const double predicted = dot(ga, step_a) + dot(gp, step_p);

                FineState candidate = make_fine_state(mesh, levels, std::move(trial), &state);
                const double jt = ctx.eval.evaluate(candidate.sigma);
                last_is_state = false;
                if (jt != j && jt < reference && jt <= reference + settings.armijo * std::min(predicted, 0.0)) {
                    accepted = std::move(candidate);
                    j_new = jt;
                    geometry_move = inf_norm(step_p);
                    t_mem[block] = std::min(1.0, 2.0 * tt);
                    return true;
                }
            }
            t_mem[block] = 1.0;
            return false;
        };
        const double previous = j;
        auto commit = [&] {
            state = std::move(*accepted);
            accepted.reset();
            j = j_new;
            last_is_state = true;
            recent.push_back(j);
            if (static_cast<int>(recent.size()) > std::max(settings.nonmonotone_window, 1)) recent.pop_front();
            if (j < best_j) {
                best = state;
                best_j = j;
            }
        };
        // The weights usually settle long before the geometry, and the joint
        // search then accepts steps too short to flip any centroid. Such a
        // step is followed by a geometry-only step along the same direction.
        bool moved = false;
        if (line_search(0, true, true)) {
            commit();
            moved = true;
            if (geometry_move < settings.delta_p) {
                p0 = state.control.geometry();
                if (line_search(2, false, true)) commit();
            }
        } else if (line_search(2, false, true) || line_search(1, true, false)) {
            commit();
            moved = true;
        }
        // A negligible joint step is not evidence of convergence while the
        // geometry blocks can still descend on their own.
        if (moved && relative_decrease_converged(previous, j, settings.tolerance) && !ctx.exhausted()) {
            p0 = state.control.geometry();
            full_geometry_direction();
            if (line_search(2, false, true)) commit();
        }
        if (!moved) {
            if (ctx.exhausted()) {
                out.stop_reason = "evaluation budget exhausted";
            } else {
                out.stalled = true;
                out.stop_reason = "line search stalled";
                log::warn("fine step: no descent along any block; stopping");
            }
            break;
        }
        ++iter;
        ctx.record(iter, j, state.sigma);
        should_stop(out, ctx, previous, j, settings.tolerance);
    }
    out.iterations = iter;
    out.final_cost = best_j;
    result.control = std::move(best.control);
    result.sigma = std::move(best.sigma);
    return result;
}

/// Golden-section search on [lo, hi]; returns the best point seen (including
/// the incumbent x0 with known value f0).
std::pair<double, double> golden_section(const std::function<std::optional<double>(double)>& f, double lo,
                                         double hi, double tol, double x0, double f0) {
    constexpr double kInvPhi = 0.6180339887498949;
    double best_x = x0, best_f = f0;
    auto probe = [&](double x) -> std::optional<double> {
        auto v = f(x);
        if (v && *v < best_f) {
            best_f = *v;
            best_x = x;
        }
        return v;
    };
    if (!(hi > lo)) return {best_x, best_f};
    double a = lo, b = hi;
    double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
    auto fc = probe(c);
    if (!fc) return {best_x, best_f};
    auto fd = probe(d);
    if (!fd) return {best_x, best_f};
    while (b - a > tol) {
        if (*fc < *fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = probe(c);
            if (!fc) break;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = probe(d);
            if (!fd) break;
        }
    }
    return {best_x, best_f};
}

FineResult fine_coordinate_descent(StepContext& ctx, ConductivityPair levels, FineState state,
                                   const FineSettings& settings) {
    const Mesh& mesh = *ctx.eval.problem().mesh;
    FineResult result;
    StepOutcome& out = result.outcome;
    double j = ctx.eval.evaluate(state.sigma);
    out.initial_cost = j;
    ctx.record(0, j, state.sigma);
    if (j <= ctx.floor) out.stop_reason = "cost at round-off floor";

    const std::size_t ns = state.control.alpha.size();
    int cycle = 0;
    while (out.stop_reason.empty()) {
        const double previous = j;
        bool budget_hit = false;
        auto evaluate_control = [&](FineControl trial) -> std::optional<FineState> {
            if (ctx.exhausted()) {
                budget_hit = true;
                return std::nullopt;
            }
            return make_fine_state(mesh, levels, std::move(trial), &state);
        };

        for (std::size_t i = 0; i < ns && ns > 1 && !budget_hit; ++i) {
            auto with_weight = [&](double a) {
                FineControl trial = state.control;
                const double rest = 1.0 - trial.alpha[i];
                for (std::size_t k = 0; k < ns; ++k) {
                    if (k == i) continue;
                    trial.alpha[k] = (rest > 0.0) ? trial.alpha[k] * (1.0 - a) / rest
                                                  : (1.0 - a) / static_cast<double>(ns - 1);
                }
                trial.alpha[i] = a;
                return trial;
            };
            auto f = [&](double a) -> std::optional<double> {
                auto s = evaluate_control(with_weight(a));
                if (!s) return std::nullopt;
                return ctx.eval.evaluate(s->sigma);
            };
            auto [a_best, j_best] =
                golden_section(f, 0.0, 1.0, settings.cd_weight_tolerance, state.control.alpha[i], j);
            if (j_best < j) {
                state = make_fine_state(mesh, levels, with_weight(a_best), &state);
                j = j_best;
            }
        }

        const std::size_t np = state.control.geometry_size();
        const double window = settings.cd_geometry_window * mesh.radius;
        const double tol = settings.cd_geometry_tolerance * mesh.radius;
        for (std::size_t k = 0; k < np && !budget_hit; ++k) {
            const auto p0 = state.control.geometry();
            auto with_param = [&](double v) {
                FineControl trial = state.control;
                auto p = p0;
                p[k] = v;
                trial.set_geometry(p);
                trial.project_geometry();
                return trial;
            };
            double lo = p0[k] - window, hi = p0[k] + window;
            const auto& b = state.control.bounds;
            if (k % 3 == 2) {
                lo = std::max(lo, b.r_min);
                hi = std::min(hi, b.r_max);
            } else {
                lo = std::max(lo, -b.center_limit);
                hi = std::min(hi, b.center_limit);
            }
            auto f = [&](double v) -> std::optional<double> {
                auto s = evaluate_control(with_param(v));
                if (!s) return std::nullopt;
                return ctx.eval.evaluate(s->sigma);
            };
            auto [v_best, j_best] = golden_section(f, lo, hi, tol, p0[k], j);
            if (j_best < j) {
                state = make_fine_state(mesh, levels, with_param(v_best), &state);
                j = j_best;
            }
        }
        ++cycle;
        ctx.record(cycle, j, state.sigma);
        if (budget_hit) {
            out.stop_reason = "evaluation budget exhausted";
            break;
        }
        if (!(j < previous)) {
            out.stalled = true;
            out.stop_reason = "coordinate sweep made no progress";
            break;
        }
        should_stop(out, ctx, previous, j, settings.tolerance);
    }
    out.iterations = cycle;
    out.final_cost = j;
    result.control = std::move(state.control);
    result.sigma = std::move(state.sigma);
    return result;
}

}  // namespace

FineResult optimize_fine(CostEvaluator& evaluator, ConductivityPair levels, const FineControl& initial,
                         const FineSettings& settings, RunTrace& trace) {
    if (initial.basis.empty() || initial.basis.size() != initial.alpha.size()) {
        throw DomainError("optimize_fine: basis and weights must be non-empty and of equal length");
    }
    validate_simplex(initial.alpha);
    if (settings.max_cost_evals < 1) throw DomainError("optimize_fine: evaluation budget must be positive");
    const Mesh& mesh = *evaluator.problem().mesh;
    StepContext ctx{evaluator, trace, "step2", evaluator.evaluations(), settings.max_cost_evals,
                    settings.cost_floor * evaluator.target_energy()};
    FineControl start = initial;
    start.project_geometry();
    FineState state = make_fine_state(mesh, levels, std::move(start));
    FineResult result = settings.method == FineMethod::coordinate_descent
                            ? fine_coordinate_descent(ctx, levels, std::move(state), settings)
                            : fine_projected_gradient(ctx, levels, std::move(state), settings);
    ctx.close(result.outcome, result.sigma);
    return result;
}

std::pair<CoarseControl, PartitionMap> initial_coarse_state(const Mesh& mesh, const ConductivityField& fine,
                                                           int n_max) {
    CoarseControl seed(n_max);
    const double mid = 0.5 * (fine.max() + fine.min());
    for (int r = 1; r <= n_max; ++r) seed.threshold(r) = mid;
    PartitionMap partition = partition_field(mesh, fine, seed);
    CoarseControl zeta = init_zeta(mesh, fine, partition);
    return {std::move(zeta), std::move(partition)};
}

CoarseResult optimize_coarse(CostEvaluator& evaluator, const ConductivityField& fine, int n_max,
                             const CoarseSettings& settings, RunTrace& trace) {
    const Mesh& mesh = *evaluator.problem().mesh;
    if (fine.size() != mesh.num_elements()) throw DomainError("optimize_coarse: fine field length mismatch");
    if (settings.max_cost_evals < 1) throw DomainError("optimize_coarse: evaluation budget must be positive");
    StepContext ctx{evaluator, trace, "step3", evaluator.evaluations(), settings.max_cost_evals,
                    settings.cost_floor * evaluator.target_energy()};
    CoarseResult result;
    StepOutcome& out = result.outcome;

    auto [zeta, partition] = initial_coarse_state(mesh, fine, n_max);
    if (!(fine.max() > fine.min())) {
        log::warn("coarse step: fine field is constant; nothing to threshold");
        result.sigma = fine;
        result.zeta = zeta;
        result.partition = partition;
        out.initial_cost = out.final_cost = evaluator.evaluate(fine);
        ctx.record(0, out.final_cost, fine);
        out.stop_reason = "constant fine field";
        return result;
    }
    const CoarseBounds bounds = coarse_bounds(fine);
    project_admissible(zeta, bounds);
    ConductivityField sigma = coarse_field(partition, zeta);
    double j = evaluator.evaluate(sigma);
    out.initial_cost = j;
    ctx.record(0, j, sigma);
    if (j <= ctx.floor) out.stop_reason = "cost at round-off floor";

    const double range = bounds.fine_max - bounds.fine_min;
    const std::size_t nv = static_cast<std::size_t>(n_max) + 1;
    std::array<double, 3> t_mem{1.0, 1.0, 1.0};
    std::deque<double> recent{j};
    CoarseControl best_zeta = zeta;
    PartitionMap best_partition = partition;
    ConductivityField best_sigma = sigma;
    double best_j = j;
    std::optional<std::pair<std::vector<double>, std::vector<double>>> history;  // (zeta, gradient)
    int iter = 0;
    while (out.stop_reason.empty()) {
        if (ctx.exhausted()) {
            out.stop_reason = "evaluation budget exhausted";
            break;
        }
        const SpatialGradient g = evaluator.gradient_at_last();
        const auto cost_at = [&](const CoarseControl& trial) {
            const PartitionMap p = partition_field(mesh, fine, trial, &partition);
            return evaluator.evaluate(coarse_field(p, trial));
        };
        const auto gz = grad_zeta(partition, g, zeta, bounds, j, cost_at, {settings.delta_zeta});
        if (ctx.exhausted()) {
            out.stop_reason = "evaluation budget exhausted";
            break;
        }

        // Values and thresholds get separate Barzilai-Borwein lengths; each
        // block's first move is capped at step * range in the max-norm.
        const auto x = zeta.values();
        std::vector<double> d(gz.size(), 0.0);
        double nvals = 0.0, nths = 0.0;
        for (int blk = 0; blk < 2; ++blk) {
            const std::size_t lo = blk == 0 ? 0 : nv, hi = blk == 0 ? nv : gz.size();
            const double gn = inf_norm(std::span(gz).subspan(lo, hi - lo));
            if (gn == 0.0) continue;
            const double cap = settings.step * range;
            double lambda = cap / gn;
            if (history) {
                double ss = 0.0, sy = 0.0;
                for (std::size_t i = lo; i < hi; ++i) {
                    const double s_i = x[i] - history->first[i];
                    ss += s_i * s_i;
                    sy += s_i * (gz[i] - history->second[i]);
                }
                if (ss > 0.0 && sy > 0.0) lambda = std::min(ss / sy, lambda);
            }
            for (std::size_t i = lo; i < hi; ++i) d[i] = -lambda * gz[i];
            (blk == 0 ? nvals : nths) = gn;
        }
        history.emplace(std::vector<double>(x.begin(), x.end()), gz);

        const double reference = *std::max_element(recent.begin(), recent.end());
        double j_new = j;
        CoarseControl zeta_new;
        PartitionMap part_new;
        ConductivityField sigma_new;
        auto line_search = [&](int block, bool values, bool thresholds) {
            if ((!values || nvals == 0.0) && (!thresholds || nths == 0.0)) return false;
            double tt = block == 0 ? 1.0 : t_mem[block];
            for (int b = 0; b <= settings.max_backtracks; ++b, tt *= 0.5) {
                if (ctx.exhausted()) return false;
                CoarseControl trial = zeta;
                auto v = trial.values();
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if ((i < nv && values) || (i >= nv && thresholds)) v[i] += tt * d[i];
                }
                project_admissible(trial, bounds);
                double predicted = 0.0;
                for (std::size_t i = 0; i < v.size(); ++i) predicted += gz[i] * (v[i] - zeta.values()[i]);
                PartitionMap p = partition_field(mesh, fine, trial, &partition);
                ConductivityField s = coarse_field(p, trial);
                const double jt = evaluator.evaluate(s);
                if (jt != j && jt < reference && jt <= reference + settings.armijo * std::min(predicted, 0.0)) {
                    zeta_new = std::move(trial);
                    part_new = std::move(p);
                    sigma_new = std::move(s);
                    j_new = jt;
                    t_mem[block] = std::min(1.0, 2.0 * tt);
                    return true;
                }
            }
            t_mem[block] = 1.0;
            return false;
        };
        if (!line_search(0, true, true) && !line_search(2, false, true) && !line_search(1, true, false)) {
            if (ctx.exhausted()) {
                out.stop_reason = "evaluation budget exhausted";
            } else {
                out.stalled = true;
                out.stop_reason = "line search stalled";
                log::warn("coarse step: no descent along any block; stopping");
            }
            break;
        }
        ++iter;
        const double previous = j;
        zeta = std::move(zeta_new);
        partition = std::move(part_new);
        sigma = std::move(sigma_new);
        j = j_new;
        recent.push_back(j);
        if (static_cast<int>(recent.size()) > std::max(settings.nonmonotone_window, 1)) recent.pop_front();
        if (j < best_j) {
            best_zeta = zeta;
            best_partition = partition;
            best_sigma = sigma;
            best_j = j;
        }
        ctx.record(iter, j, sigma);
        should_stop(out, ctx, previous, j, settings.tolerance);
    }
    out.iterations = iter;
    out.final_cost = best_j;
    result.sigma = std::move(best_sigma);
    result.zeta = std::move(best_zeta);
    result.partition = std::move(best_partition);
    ctx.close(out, result.sigma);
    return result;
}

}  // namespace eitbin
