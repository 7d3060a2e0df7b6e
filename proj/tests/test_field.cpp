#include "support.hpp"

#include "eitbin/errors.hpp"
#include "eitbin/field.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace eitbin;

namespace {

// Hand-rolled generator: random strictly positive fields.
ConductivityField random_field(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return ConductivityField(std::move(v));
}

}  // namespace

TEST(Field, RejectsNonPositiveOrNonFinite) {
    EXPECT_THROW(ConductivityField(std::vector<double>{1.0, 0.0}), DomainError);
    EXPECT_THROW(ConductivityField(std::vector<double>{-1.0}), DomainError);
    EXPECT_THROW(ConductivityField(std::vector<double>{NAN}), DomainError);
    EXPECT_THROW(ConductivityField(std::vector<double>{INFINITY}), DomainError);
}

TEST(SampleRandom, InvariantsHoldOverManySeeds) {
    const double R = 0.1;
    std::array<int, 9> counts{};
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        Rng rng = substream(seed, "collection");
        const SampleParam s = sample_random(rng, R, 8, 0.3);
        ASSERT_GE(s.circles.size(), 1u);
        ASSERT_LE(s.circles.size(), 8u);
        ++counts[s.circles.size()];
        for (const auto& c : s.circles) {
            EXPECT_GT(c.r, 0.0);
            EXPECT_LE(c.r, 0.3 * R);
            EXPECT_LT(std::hypot(c.x, c.y), R + c.r);
        }
        EXPECT_NO_THROW(validate_sample(s, R, 8));
    }
    // Chi-square against uniform N_c over 1..8; 7 dof, 0.1% critical value 24.32.
    double chi2 = 0.0;
    for (int k = 1; k <= 8; ++k) chi2 += std::pow(counts[k] - 250.0, 2) / 250.0;
    EXPECT_LT(chi2, 24.32);
}

TEST(SampleRandom, SubstreamsAreReproducible) {
    Rng a = substream(7, "collection", 3), b = substream(7, "collection", 3), c = substream(7, "collection", 4);
    const SampleParam sa = sample_random(a, 0.1, 8, 0.3);
    EXPECT_EQ(sa, sample_random(b, 0.1, 8, 0.3));
    EXPECT_NE(sa, sample_random(c, 0.1, 8, 0.3));
}

TEST(ValidateSample, RejectsBadSamples) {
    EXPECT_THROW(validate_sample({}, 0.1, 8), DomainError);
    EXPECT_THROW(validate_sample({{{0, 0, 0.0}}}, 0.1, 8), DomainError);
    EXPECT_THROW(validate_sample({{{0.2, 0, 0.05}}}, 0.1, 8), DomainError);
    EXPECT_THROW(validate_sample({{{0, 0, 0.01}, {0, 0, 0.01}}}, 0.1, 1), DomainError);
    EXPECT_NO_THROW(validate_sample({{{0.12, 0, 0.05}}}, 0.1, 8));
}

TEST(Rasterize, CentredCircleCoversAreaFraction) {
    const Mesh& m = test::rig(2032).mesh;
    const auto v = rasterize_values(m, {{{0, 0, 0.03}}}, 0.4, 0.2);
    double area = 0.0;
    for (std::size_t e = 0; e < v.size(); ++e) {
        if (v[e] == 0.4) area += m.element_areas[e];
    }
    EXPECT_NEAR(area / m.total_area(), 0.09, 0.02);
}

TEST(Rasterize, ValuesAreExactlyTwoLevelsAndMatchCentroidTest) {
    const Mesh& m = test::rig(2032).mesh;
    const SampleParam s{{{0.03, 0.01, 0.02}, {-0.05, -0.02, 0.015}}};
    const auto v = rasterize_values(m, s, 0.4, 0.2);
    for (std::size_t e = 0; e < v.size(); ++e) {
        bool inside = false;
        for (const auto& c : s.circles) {
            inside |= std::hypot(m.centroids[e].x - c.x, m.centroids[e].y - c.y) < c.r;
        }
        EXPECT_EQ(v[e], inside ? 0.4 : 0.2) << e;
    }
}

TEST(Blend, ConvexCombinationStaysBetweenLevels) {
    const Mesh& m = test::rig(2032).mesh;
    BlendControl c{{{{{0.02, 0, 0.03}}}, {{{-0.02, 0, 0.03}}}, {{{0, 0.05, 0.02}}}}, {0.5, 0.3, 0.2}};
    const ConductivityField f = blend(m, c, 0.4, 0.2);
    for (double v : f.values()) {
        EXPECT_GE(v, 0.2 - 1e-15);
        EXPECT_LE(v, 0.4 + 1e-15);
    }
    c.weights = {0.5, 0.6, -0.1};
    EXPECT_THROW(blend(m, c, 0.4, 0.2), ConstraintError);
}

TEST(Blend, WeightedSumMatchesLoopOracle) {
    std::mt19937_64 rng(11);
    const std::size_t n = 50;
    std::vector<ConductivityField> fields;
    for (int i = 0; i < 4; ++i) fields.push_back(random_field(rng, n, 0.1, 1.0));
    const std::vector<double> w{0.1, 0.2, 0.3, 0.4};
    const ConductivityField s = weighted_sum(fields, w);
    for (std::size_t e = 0; e < n; ++e) {
        double expected = 0.0;
        for (int i = 0; i < 4; ++i) expected += w[i] * fields[i][e];
        EXPECT_NEAR(s[e], expected, 1e-15);
    }
}

TEST(ValidateSimplex, Boundaries) {
    EXPECT_NO_THROW(validate_simplex(std::vector<double>{0.25, 0.75}));
    EXPECT_NO_THROW(validate_simplex(std::vector<double>{1.0, 0.0}));
    EXPECT_THROW(validate_simplex(std::vector<double>{0.5, 0.6}), ConstraintError);
    EXPECT_THROW(validate_simplex(std::vector<double>{1.1, -0.1}), ConstraintError);
}

TEST(L2Error, MatchesExtendedPrecisionResummation) {
    const Mesh& m = test::rig(2032).mesh;
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_field(rng, m.num_elements(), 0.1, 1.0);
        const auto b = random_field(rng, m.num_elements(), 0.1, 1.0);
        long double s = 0.0L;
        for (std::size_t e = 0; e < m.num_elements(); ++e) {
            const long double d = static_cast<long double>(a[e]) - static_cast<long double>(b[e]);
            s += static_cast<long double>(m.element_areas[e]) * d * d;
        }
        const double oracle = static_cast<double>(std::sqrt(s));
        EXPECT_NEAR(l2_error(m, a, b), oracle, 1e-12 * oracle);
    }
}

TEST(L2Error, SymmetricAndZeroOnItself) {
    const Mesh& m = test::rig(2032).mesh;
    std::mt19937_64 rng(6);
    const auto a = random_field(rng, m.num_elements(), 0.1, 1.0);
    const auto b = random_field(rng, m.num_elements(), 0.1, 1.0);
    EXPECT_EQ(l2_error(m, a, a), 0.0);
    EXPECT_DOUBLE_EQ(l2_error(m, a, b), l2_error(m, b, a));
}

TEST(TrueModel, RegionValuesOverrideHigh) {
    const Mesh& m = test::rig(2032).mesh;
    const std::vector<Region> regions{{{0.04, 0.0, 0.02}, 0.9}, {{-0.04, 0.0, 0.02}, std::nullopt}};
    const ConductivityField f = make_true_model(m, regions, 0.4, 0.2);
    const MeshLocator loc(m);
    EXPECT_EQ(f[static_cast<std::size_t>(loc.locate({0.04, 0.0}))], 0.9);
    EXPECT_EQ(f[static_cast<std::size_t>(loc.locate({-0.04, 0.0}))], 0.4);
    EXPECT_EQ(f[static_cast<std::size_t>(loc.locate({0.0, 0.08}))], 0.2);
}

TEST(TrueModel, MaskSampledAtCentroids) {
    const Mesh& m = test::rig(2032).mesh;
    // Left half label 1, right half label 0.
    std::ostringstream text;
    const int n = 200;
    text << n << ' ' << n << '\n';
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) text << (c < n / 2 ? 1 : 0) << ' ';
        text << '\n';
    }
    std::istringstream in(text.str());
    const Mask mask = read_mask(in);
    const ConductivityField f = make_true_model_from_mask(m, mask, 0.4, 0.2);
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        if (std::abs(m.centroids[e].x) < 2e-3) continue;
        EXPECT_EQ(f[e], m.centroids[e].x < 0 ? 0.4 : 0.2);
    }
    std::istringstream coarse("2 2\n1 0\n0 1\n");
    EXPECT_THROW(make_true_model_from_mask(m, read_mask(coarse), 0.4, 0.2), DomainError);
}

TEST(FieldIo, RoundTripIsExact) {
    std::mt19937_64 rng(9);
    const auto f = random_field(rng, 100, 0.01, 10.0);
    std::stringstream s;
    write_field(s, f);
    EXPECT_EQ(read_field(s), f);
}

TEST(FieldIo, SamplesRoundTripIsExact) {
    std::vector<SampleParam> samples;
    for (std::uint64_t i = 0; i < 30; ++i) {
        Rng rng = substream(2, "collection", i);
        samples.push_back(sample_random(rng, 0.1, 8, 0.3));
    }
    std::stringstream s;
    write_samples(s, samples);
    EXPECT_EQ(read_samples(s), samples);
}
