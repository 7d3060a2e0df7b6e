#include "support.hpp"

#include "eitbin/errors.hpp"
#include "eitbin/grad.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace eitbin;

namespace {

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

ConductivityField random_sample_field(const Mesh& mesh, std::uint64_t seed) {
    Rng rng = substream(seed, "test-fields");
    std::uniform_real_distribution<double> lo(0.05, 0.5), ratio(1.1, 5.0);
    const double low = lo(rng);
    const SampleParam s = sample_random(rng, mesh.radius, 8, 0.3);
    return rasterize_sample(mesh, s, low * ratio(rng), low);
}

}  // namespace

TEST(Excitation, DefaultPatternSumsToZero) {
    const auto u = default_voltage_pattern();
    ASSERT_EQ(u.size(), 16u);
    double s = 0.0;
    for (double v : u) s += v;
    EXPECT_NEAR(s, 0.0, 1e-12);
    EXPECT_THROW(ExcitationScheme(std::vector<double>{1.0, 1.0}), DomainError);
}

TEST(Excitation, RotationIsCyclicShift) {
    const std::vector<double> u{1, 2, 3, 4};
    EXPECT_EQ(rotate_pattern(u, 0), u);
    EXPECT_EQ(rotate_pattern(u, 1), (std::vector<double>{2, 3, 4, 1}));
    EXPECT_EQ(rotate_pattern(rotate_pattern(u, 1), 3), u);
}

TEST(Forward, CurrentsConserveOverRandomFields) {
    const auto& r = test::rig(2032);
    ForwardSolver solver(r.mesh, r.layout);
    int solves = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        solver.set_conductivity(random_sample_field(r.mesh, seed));
        const ForwardResult res = simulate(solver, r.scheme);
        for (int k = 0; k < 16; ++k) {
            double sum = 0.0, big = 0.0;
            for (int l = 0; l < 16; ++l) {
                sum += res.currents(k, l);
                big = std::max(big, std::abs(res.currents(k, l)));
            }
            EXPECT_LE(std::abs(sum), 1e-8 * big);
            ++solves;
        }
    }
    EXPECT_GE(solves, 100);
}

TEST(Forward, OneShotHelperMatchesSolver) {
    const auto& r = test::rig(2032);
    const ConductivityField s = random_sample_field(r.mesh, 42);
    ForwardSolver solver(r.mesh, r.layout);
    solver.set_conductivity(s);
    const auto u = r.scheme.pattern(3);
    const PotentialField a = solver.solve_forward(u);
    const PotentialField b = assemble_and_solve_forward(r.mesh, r.layout, s, u);
    ASSERT_EQ(a.values.size(), b.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-13);
    const auto ia = solver.electrode_currents(a, u);
    const auto ib = electrode_currents(r.mesh, r.layout, b, u);
    for (int l = 0; l < 16; ++l) EXPECT_NEAR(ia[l], ib[l], 1e-13);
}

TEST(Forward, MatrixIsSymmetric) {
    const auto& r = test::rig(2032);
    ForwardSolver solver(r.mesh, r.layout);
    solver.set_conductivity(random_sample_field(r.mesh, 1));
    const Eigen::SparseMatrix<double> a = solver.matrix();
    const Eigen::SparseMatrix<double> at = a.transpose();
    EXPECT_LE((a - at).norm(), 1e-14 * a.norm());
}

TEST(Forward, ConstantPotentialUnderEqualVoltages) {
    // All electrodes at the same voltage drive no current.
    const auto& r = test::rig(2032);
    ForwardSolver solver(r.mesh, r.layout);
    solver.set_conductivity(ConductivityField::uniform(r.mesh.num_elements(), 0.3));
    const std::vector<double> u(16, 2.5);
    const PotentialField p = solver.solve_forward(u);
    for (double v : p.values) EXPECT_NEAR(v, 2.5, 1e-10);
    EXPECT_LE(max_abs(solver.electrode_currents(p, u)), 1e-10);
}

TEST(Forward, RotatingTheModelRotatesTheMeasurements) {
    const auto& r = test::rig(2032);
    const SampleParam s{{{0.031, 0.012, 0.021}, {-0.043, -0.027, 0.017}}};
    SampleParam rotated;
    const double t = 2 * std::numbers::pi / 16;
    for (const auto& c : s.circles) {
        rotated.circles.push_back({c.x * std::cos(t) - c.y * std::sin(t), c.x * std::sin(t) + c.y * std::cos(t), c.r});
    }
    const auto a = simulate_measurements(r.mesh, r.layout, rasterize_sample(r.mesh, s, 0.4, 0.2), r.scheme);
    const auto b = simulate_measurements(r.mesh, r.layout, rasterize_sample(r.mesh, rotated, 0.4, 0.2), r.scheme);
    const double scale = max_abs(a.values());
    // Electrode l moves to l + 1; pattern k then drives it as pattern k - 1.
    for (int k = 0; k < 16; ++k) {
        for (int l = 0; l < 16; ++l) {
            EXPECT_NEAR(b((k + 15) % 16, (l + 1) % 16), a(k, l), 1e-9 * scale);
        }
    }
}

TEST(Forward, HigherConductivityDrawsMoreCurrent) {
    const auto& r = test::rig(2032);
    const auto lo = simulate_measurements(r.mesh, r.layout, ConductivityField::uniform(r.mesh.num_elements(), 0.2),
                                          r.scheme);
    const auto hi = simulate_measurements(r.mesh, r.layout, ConductivityField::uniform(r.mesh.num_elements(), 0.4),
                                          r.scheme);
    EXPECT_GT(max_abs(hi.values()), max_abs(lo.values()));
}

TEST(Cost, MatchesDoubleLoopOracle) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1e-2);
    for (int trial = 0; trial < 20; ++trial) {
        MeasurementSet a(16), b(16);
        for (double& v : a.values()) v = n(rng);
        for (double& v : b.values()) v = n(rng);
        double oracle = 0.0;
        for (int k = 0; k < 16; ++k) {
            for (int l = 0; l < 16; ++l) oracle += (a(k, l) - b(k, l)) * (a(k, l) - b(k, l));
        }
        EXPECT_NEAR(cost(a, b), oracle, 1e-12 * oracle);
        EXPECT_EQ(cost(a, a), 0.0);
    }
}

TEST(Adjoint, SpatialGradientMatchesCentralDifferences) {
    const auto& r = test::rig(2032);
    const ConductivityField truth = random_sample_field(r.mesh, 3);
    const auto fx = test::fixture(r, truth);
    CostEvaluator eval(fx.problem());
    const ConductivityField sigma = ConductivityField::uniform(r.mesh.num_elements(), 0.25);
    eval.evaluate(sigma);
    const SpatialGradient g = eval.gradient_at_last();
    for (std::size_t e : {0ul, 137ul, 900ul, r.mesh.num_elements() - 1}) {
        const double h = 1e-4;
        std::vector<double> p(sigma.values().begin(), sigma.values().end()), m = p;
        p[e] += h;
        m[e] -= h;
        const double fd = (eval.evaluate(ConductivityField(p)) - eval.evaluate(ConductivityField(m))) / (2 * h);
        EXPECT_NEAR(g.values[e], fd, 1e-6 * std::abs(fd) + 1e-18) << e;
    }
}

TEST(Adjoint, GradientVanishesAtTheTarget) {
    const auto& r = test::rig(2032);
    const ConductivityField truth = random_sample_field(r.mesh, 4);
    const auto fx = test::fixture(r, truth);
    CostEvaluator eval(fx.problem());
    EXPECT_EQ(eval.evaluate(truth), 0.0);
    EXPECT_EQ(max_abs(eval.gradient_at_last().values), 0.0);
}

TEST(Noise, ZeroLevelIsIdentityAndSeedsAreReproducible) {
    MeasurementSet d(16);
    for (int i = 0; i < 256; ++i) d.values()[i] = 1e-3 * (i + 1);
    Rng a = substream(1, "noise"), b = substream(1, "noise");
    EXPECT_EQ(add_noise(d, 0.0, a), d);
    Rng c = substream(1, "noise");
    EXPECT_EQ(add_noise(d, 0.01, b), add_noise(d, 0.01, c));
}

TEST(Noise, RelativePerturbationHasUnitSpread) {
    MeasurementSet d(16);
    for (int i = 0; i < 256; ++i) d.values()[i] = (i % 2 ? -1.0 : 1.0) * (1 + i);
    Rng rng = substream(2, "noise");
    const double level = 0.005;
    const auto n = add_noise(d, level, rng);
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < 256; ++i) {
        const double xi = (n.values()[i] / d.values()[i] - 1.0) / level;
        mean += xi / 256;
        sq += xi * xi / 256;
    }
    EXPECT_LT(std::abs(mean), 0.3);
    EXPECT_NEAR(std::sqrt(sq - mean * mean), 1.0, 0.2);
}

TEST(MeasurementIo, RoundTripIsExact) {
    const auto& r = test::rig(2032);
    const auto d = simulate_measurements(r.mesh, r.layout, random_sample_field(r.mesh, 5), r.scheme);
    std::stringstream s;
    write_measurements(s, d);
    EXPECT_EQ(read_measurements(s), d);
    std::stringstream row;
    write_measurement_row(row, d);
    std::string line;
    std::getline(row, line);
    EXPECT_EQ(parse_measurement_row(line), d);
}
