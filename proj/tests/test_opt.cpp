#include "support.hpp"

#include "eitbin/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <filesystem>
#include <set>
#include <sstream>

using namespace eitbin;

namespace {

// Hand-rolled generator: vectors mixing signs, ties and large magnitudes.
std::vector<double> random_vector(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len(1, 12), kind(0, 3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (double& x : v) {
        switch (kind(rng)) {
            case 0: x = u(rng); break;
            case 1: x = 0.0; break;
            case 2: x = 50.0 * u(rng); break;
            default: x = 0.25; break;
        }
    }
    return v;
}

SampleCollection small_collection(const test::Rig& r, int n, int threads = 1) {
    CollectionParams p;
    p.nc_max = 4;
    p.seed = 8;
    p.threads = threads;
    return precompute_collection(r.mesh, r.layout, r.scheme, n, p);
}

}  // namespace

TEST(Termination, RelativeDecreaseOnScriptedSequences) {
    // Returns the first k at which the rule fires.
    auto first_stop = [](const std::vector<double>& j, double tol) {
        for (std::size_t k = 1; k < j.size(); ++k) {
            if (relative_decrease_converged(j[k - 1], j[k], tol)) return static_cast<int>(k);
        }
        return -1;
    };
    EXPECT_EQ(first_stop({1.0, 0.5, 0.25, 0.2499999999}, 1e-9), 3);
    EXPECT_EQ(first_stop({1.0, 0.5, 0.25, 0.125}, 1e-9), -1);
    EXPECT_EQ(first_stop({1.0, 0.0}, 1e-9), 1);
    EXPECT_EQ(first_stop({1e-3, 1e-3}, 1e-9), 1);
    EXPECT_EQ(first_stop({2.0, 1.0, 0.99}, 0.02), 2);
}

TEST(Simplex, ProjectionSatisfiesOptimalityConditions) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto v = random_vector(rng);
        const auto w = project_simplex(v);
        ASSERT_EQ(w.size(), v.size());
        double sum = 0.0;
        for (double x : w) {
            EXPECT_GE(x, 0.0);
            sum += x;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
        EXPECT_NO_THROW(validate_simplex(w));
        // KKT: v_i - w_i equals a common theta on the support and v_i <= theta off it.
        double theta = NAN;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (w[i] > 0.0) theta = v[i] - w[i];
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double tol = 1e-12 * std::max(1.0, std::abs(v[i]));
            if (w[i] > 0.0) EXPECT_NEAR(v[i] - w[i], theta, tol);
            else EXPECT_LE(v[i], theta + tol);
        }
    }
}

TEST(Simplex, PointsOnTheSimplexAreFixed) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> w(static_cast<std::size_t>(1 + trial % 9));
        for (double& x : w) x = u(rng);
        const double s = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& x : w) x /= s;
        const auto p = project_simplex(w);
        for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(p[i], w[i], 1e-15);
    }
    EXPECT_THROW(project_simplex(std::vector<double>{}), DomainError);
}

TEST(Collection, ThreadCountDoesNotChangeResults) {
    const auto& r = test::rig(500);
    const auto a = small_collection(r, 12, 1);
    const auto b = small_collection(r, 12, 3);
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_EQ(a.data, b.data);
}

TEST(Collection, SaveLoadRoundTrip) {
    const auto& r = test::rig(500);
    const auto c = small_collection(r, 5);
    const auto dir = std::filesystem::temp_directory_path() / "eitbin_collection_roundtrip";
    std::filesystem::create_directories(dir);
    save_collection((dir / "s.txt").string(), (dir / "d.csv").string(), c);
    const auto back = load_collection((dir / "s.txt").string(), (dir / "d.csv").string(), c.levels);
    EXPECT_EQ(back.samples, c.samples);
    EXPECT_EQ(back.data, c.data);
    std::filesystem::remove_all(dir);
}

TEST(Ranking, MatchesFullSortOracleAtHundredSamples) {
    const auto& r = test::rig(500);
    SampleCollection c = small_collection(r, 100);
    // Duplicate a few rows to exercise the index tie-break.
    c.data[40] = c.data[7];
    c.samples[40] = c.samples[7];
    c.data[93] = c.data[7];
    const auto target = simulate_measurements(r.mesh, r.layout,
                                              make_true_model(r.mesh, model1_circles(), 0.4, 0.2), r.scheme);
    const Ranking rank = rank_and_select(c, target, 10, 0.1);
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < 100; ++i) {
        double j = 0.0;
        for (std::size_t k = 0; k < target.values().size(); ++k) {
            const double d = c.data[i].values()[k] - target.values()[k];
            j += d * d;
        }
        all.emplace_back(j, i);
    }
    std::sort(all.begin(), all.end());
    ASSERT_EQ(rank.order.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(rank.order[i], all[i].second);
        EXPECT_NEAR(rank.costs[i], all[i].first, 1e-12 * all[i].first);
        EXPECT_EQ(rank.control.basis[i], c.samples[all[i].second]);
        EXPECT_DOUBLE_EQ(rank.control.alpha[i], 0.1);
    }
    EXPECT_THROW(rank_and_select(c, target, 0, 0.1), DomainError);
    EXPECT_THROW(rank_and_select(c, target, 101, 0.1), DomainError);
}

class FineRun : public ::testing::TestWithParam<FineMethod> {};

TEST_P(FineRun, BudgetIsHonestAndBestSeenIsReturned) {
    const auto& r = test::rig(500);
    const auto c = small_collection(r, 60);
    const auto fx = test::fixture(r, make_true_model(r.mesh, model1_circles(), 0.4, 0.2));
    const Ranking rank = rank_and_select(c, fx.target, 4, 0.1);
    RunTrace trace;
    CostEvaluator eval(fx.problem(), &trace);
    FineSettings s;
    s.method = GetParam();
    s.max_cost_evals = 150;
    const FineResult res = optimize_fine(eval, c.levels, rank.control, s, trace);

    EXPECT_EQ(eval.evaluations(), eval.simulations());
    EXPECT_EQ(static_cast<long>(trace.best_history().size()), eval.evaluations());
    ASSERT_FALSE(trace.rows().empty());
    EXPECT_EQ(trace.rows().back().cost_evals, eval.evaluations());
    EXPECT_LE(eval.evaluations(), s.max_cost_evals + 64);

    const double best = *std::min_element(trace.best_history().begin(), trace.best_history().end());
    EXPECT_EQ(res.outcome.final_cost, best);
    EXPECT_LE(res.outcome.final_cost, res.outcome.initial_cost);
    EXPECT_NO_THROW(validate_simplex(res.control.alpha));
    EXPECT_EQ(res.sigma, blend(r.mesh, res.control.blend_control(), 0.4, 0.2));
    CostEvaluator check(fx.problem());
    EXPECT_EQ(check.evaluate(res.sigma), res.outcome.final_cost);
}

INSTANTIATE_TEST_SUITE_P(Methods, FineRun,
                         ::testing::Values(FineMethod::projected_gradient, FineMethod::coordinate_descent));

TEST(CoarseRun, BudgetIsHonestAndOutputIsPiecewiseConstant) {
    const auto& r = test::rig(500);
    const auto fx = test::fixture(r, make_true_model(r.mesh, model1_circles(), 0.4, 0.2));
    const ConductivityField fine =
        blend(r.mesh, {{{{{0.04, 0.03, 0.03}}}, {{{-0.03, -0.03, 0.025}}}}, {0.7, 0.3}}, 0.4, 0.2);
    RunTrace trace;
    CostEvaluator eval(fx.problem(), &trace);
    CoarseSettings s;
    s.max_cost_evals = 80;
    const CoarseResult res = optimize_coarse(eval, fine, 3, s, trace);
    EXPECT_EQ(eval.evaluations(), eval.simulations());
    EXPECT_EQ(static_cast<long>(trace.best_history().size()), eval.evaluations());
    EXPECT_LE(res.outcome.final_cost, res.outcome.initial_cost);
    EXPECT_EQ(res.sigma, coarse_field(res.partition, res.zeta));
    std::set<double> distinct(res.sigma.values().begin(), res.sigma.values().end());
    EXPECT_LE(distinct.size(), 4u);
}

TEST(FineControl, GeometryRoundTripAndProjection) {
    FineControl c;
    c.basis = {{{{0.01, 0.02, 0.03}, {0.04, 0.05, 0.06}}}, {{{0.5, 0.0, -1.0}}}};
    c.alpha = {0.5, 0.5};
    c.bounds = default_fine_bounds(0.1);
    const auto p = c.geometry();
    EXPECT_EQ(p, (std::vector<double>{0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.5, 0.0, -1.0}));
    FineControl d = c;
    d.set_geometry(p);
    EXPECT_EQ(d.basis, c.basis);
    EXPECT_THROW(d.set_geometry(std::vector<double>{1.0}), DomainError);
    d.project_geometry();
    for (const auto& s : d.basis) {
        for (const auto& k : s.circles) {
            EXPECT_GE(k.r, d.bounds.r_min);
            EXPECT_LE(k.r, d.bounds.r_max);
            EXPECT_LT(std::hypot(k.x, k.y), 0.1 + k.r);
        }
    }
}

TEST(Trace, EvaluationsToReachUsesBestSoFar) {
    RunTrace t;
    t.best_history() = {5.0, 3.0, 3.0, 1.0};
    EXPECT_EQ(t.evaluations_to_reach(3.0), 2);
    EXPECT_EQ(t.evaluations_to_reach(1.0), 4);
    EXPECT_FALSE(t.evaluations_to_reach(0.5).has_value());
    t.add({0, "step1", 5.0, 1, std::nullopt});
    std::ostringstream out;
    t.write_csv(out);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "iter,phase,cost,cost_evals,l2_error");
}
