#include "support.hpp"

#include "eitbin/coarse.hpp"
#include "eitbin/errors.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace eitbin;

namespace {

const Mesh& mesh() { return test::rig(2032).mesh; }

ConductivityField two_blobs(double big_r, double small_r) {
    return make_true_model(mesh(), std::vector<Region>{{{0.04, 0.0, big_r}, std::nullopt}, {{-0.04, 0.0, small_r}, std::nullopt}},
                           0.4, 0.2);
}

CoarseControl thresholds_at(int n_max, double th) {
    CoarseControl z(n_max);
    z.low() = 0.2;
    for (int n = 1; n <= n_max; ++n) {
        z.high(n) = 0.4;
        z.threshold(n) = th;
    }
    return z;
}

}  // namespace

TEST(CoarseControl, LayoutIsLowHighsThresholds) {
    CoarseControl z(2, {1, 2, 3, 4, 5});
    EXPECT_EQ(z.low(), 1);
    EXPECT_EQ(z.high(1), 2);
    EXPECT_EQ(z.high(2), 3);
    EXPECT_EQ(z.threshold(1), 4);
    EXPECT_EQ(z.threshold(2), 5);
    EXPECT_ANY_THROW(CoarseControl(2, {1, 2, 3}));
}

TEST(Adjacency, SymmetricWithAtMostThreeNeighbours) {
    const auto adj = element_adjacency(mesh());
    for (std::size_t e = 0; e < adj.size(); ++e) {
        EXPECT_LE(adj[e].size(), 3u);
        for (int n : adj[e]) {
            const auto& back = adj[static_cast<std::size_t>(n)];
            EXPECT_NE(std::find(back.begin(), back.end(), static_cast<int>(e)), back.end());
        }
    }
}

TEST(Components, SeparatedBlobsGiveTwoComponents) {
    const auto f = two_blobs(0.025, 0.015);
    std::vector<bool> mask(f.size());
    std::size_t flagged = 0;
    for (std::size_t e = 0; e < f.size(); ++e) flagged += (mask[e] = f[e] > 0.3);
    const auto comps = connected_components(mesh(), mask);
    ASSERT_EQ(comps.size(), 2u);
    EXPECT_EQ(comps[0].size() + comps[1].size(), flagged);
    EXPECT_TRUE(connected_components(mesh(), std::vector<bool>(f.size(), false)).empty());
}

TEST(Partition, RegionsOrderedByDescendingArea) {
    const auto f = two_blobs(0.015, 0.025);
    const PartitionMap p = partition_field(mesh(), f, thresholds_at(3, 0.3));
    EXPECT_EQ(p.nonempty_regions(), 2);
    EXPECT_GT(p.region_area(mesh(), 1), p.region_area(mesh(), 2));
    EXPECT_EQ(p.region_area(mesh(), 3), 0.0);
    for (std::size_t e = 0; e < f.size(); ++e) {
        EXPECT_EQ(p.region_of_element[e] != 0, f[e] > 0.3);
        if (p.region_of_element[e] == 1) {
            EXPECT_LT(mesh().centroids[e].x, 0.0);
        }
    }
}

TEST(Partition, KeepsOnlyTheLargestComponents) {
    const auto f = two_blobs(0.025, 0.015);
    const PartitionMap p = partition_field(mesh(), f, thresholds_at(1, 0.3));
    EXPECT_EQ(p.nonempty_regions(), 1);
    for (std::size_t e = 0; e < f.size(); ++e) {
        if (p.region_of_element[e] == 1) {
            EXPECT_GT(mesh().centroids[e].x, 0.0);
        }
    }
}

TEST(Partition, PreviousLabelsFollowOverlap) {
    const auto f = two_blobs(0.025, 0.02);
    const CoarseControl z = thresholds_at(2, 0.3);
    const PartitionMap first = partition_field(mesh(), f, z);
    // The small blob grows past the big one: labels stay with their blob.
    const auto g = two_blobs(0.025, 0.03);
    const PartitionMap tracked = partition_field(mesh(), g, z, &first);
    const PartitionMap fresh = partition_field(mesh(), g, z);
    for (std::size_t e = 0; e < f.size(); ++e) {
        if (first.region_of_element[e] != 0 && g[e] > 0.3) {
            EXPECT_EQ(tracked.region_of_element[e], first.region_of_element[e]);
        }
    }
    EXPECT_NE(tracked.region_of_element, fresh.region_of_element);
}

TEST(Partition, EmptyRegionAdoptsUnclaimedComponent) {
    const auto f = two_blobs(0.025, 0.02);
    const CoarseControl z = thresholds_at(3, 0.3);
    PartitionMap previous = partition_field(mesh(), f, z);
    // Drop region 2 so it is empty in the previous state.
    for (int& l : previous.region_of_element) l = l == 2 ? 0 : l;
    ASSERT_EQ(previous.nonempty_regions(), 1);
    const PartitionMap next = partition_field(mesh(), f, z, &previous);
    EXPECT_EQ(next.nonempty_regions(), 2);
    const PartitionMap fresh = partition_field(mesh(), f, z);
    EXPECT_EQ(next.region_of_element, fresh.region_of_element);
}

TEST(Partition, CoarseFieldReproducesPiecewiseConstantInput) {
    const auto f = two_blobs(0.025, 0.02);
    const PartitionMap p = partition_field(mesh(), f, thresholds_at(3, 0.3));
    const CoarseControl z = init_zeta(mesh(), f, p);
    // Area-weighted means of equal values: exact up to summation round-off.
    EXPECT_NEAR(z.low(), 0.2, 1e-14);
    EXPECT_NEAR(z.high(1), 0.4, 1e-14);
    EXPECT_NEAR(z.high(2), 0.4, 1e-14);
    for (int n = 1; n <= 3; ++n) EXPECT_DOUBLE_EQ(z.threshold(n), 0.3);
    const ConductivityField c = coarse_field(p, z);
    for (std::size_t e = 0; e < f.size(); ++e) EXPECT_NEAR(c[e], f[e], 1e-14);
}

TEST(Admissible, ProjectionIsAdmissibleAndIdempotent) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    const auto f = two_blobs(0.025, 0.02);
    const CoarseBounds b = coarse_bounds(f);
    for (int trial = 0; trial < 500; ++trial) {
        CoarseControl z(3);
        for (double& v : z.values()) v = u(rng);
        project_admissible(z, b);
        EXPECT_TRUE(is_admissible(z, b));
        CoarseControl again = z;
        project_admissible(again, b);
        EXPECT_EQ(again, z);
    }
}

TEST(Admissible, RejectsThresholdsOutsideFineRange) {
    const auto f = two_blobs(0.025, 0.02);
    const CoarseBounds b = coarse_bounds(f);
    CoarseControl z = thresholds_at(2, 0.3);
    EXPECT_TRUE(is_admissible(z, b));
    z.threshold(2) = 0.4;
    EXPECT_FALSE(is_admissible(z, b));
    z.threshold(2) = 0.3;
    z.low() = 0.5;
    EXPECT_FALSE(is_admissible(z, b));
}
