#pragma once

#include "eitbin/field.hpp"
#include "eitbin/geometry.hpp"

#include <optional>
#include <span>
#include <vector>

namespace eitbin {

/// Coarse-scale control, laid out as [low, high_1..high_N, threshold_1..threshold_N].
class CoarseControl {
public:
    CoarseControl() = default;
    explicit CoarseControl(int n_max) : n_max_(n_max), values_(2 * n_max + 1, 0.0) {}
    CoarseControl(int n_max, std::vector<double> values);

    int n_max() const { return n_max_; }
    std::size_t size() const { return values_.size(); }

    double low() const { return values_[0]; }
    double& low() { return values_[0]; }
    double high(int region) const { return values_[region]; }  ///< region in 1..n_max
    double& high(int region) { return values_[region]; }
    double threshold(int region) const { return values_[n_max_ + region]; }
    double& threshold(int region) { return values_[n_max_ + region]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    bool operator==(const CoarseControl&) const = default;

private:
    int n_max_ = 0;
    std::vector<double> values_;
};

/// Element labels: 0 is healthy background, 1..n_max are high-conductivity regions.
struct PartitionMap {
    int n_max = 0;
    std::vector<int> region_of_element;

    /// Indicator of element e belonging to coarse set j (0 = background, j = region).
    bool indicator(std::size_t e, int j) const { return region_of_element[e] == j; }
    double region_area(const Mesh& mesh, int region) const;
    int nonempty_regions() const;
};

/// Connected components (shared-edge adjacency) of the elements flagged in `mask`.
std::vector<std::vector<int>> connected_components(const Mesh& mesh, const std::vector<bool>& mask);

/// Per-element neighbours across shared edges.
std::vector<std::vector<int>> element_adjacency(const Mesh& mesh);

/// Fine-to-coarse partition of the fine field `fine`.
///
/// Without `previous`, the super-threshold set for threshold_1 is split into
/// connected components and the n_max largest (by area) become regions
/// 1..n_max in descending area order. With `previous`, region n is the
/// component of {fine >= threshold_n} with the largest area overlap with the
/// previous region n; lower-numbered regions claim shared elements first.
/// A region that was empty in `previous` adopts the largest unclaimed
/// component of {fine >= threshold_n} touching no other previous region.
PartitionMap partition_field(const Mesh& mesh, const ConductivityField& fine, const CoarseControl& zeta,
                             const PartitionMap* previous = nullptr);

/// Initial coarse control: every threshold at (max + min) / 2, low = mean of
/// sub-threshold values, high_n = mean over region n.
CoarseControl init_zeta(const Mesh& mesh, const ConductivityField& fine, const PartitionMap& partition);

/// Piecewise-constant field: low on label 0, high_n on region n.
ConductivityField coarse_field(const PartitionMap& partition, const CoarseControl& zeta);

/// Admissible box for the coarse control built from the fine field range.
struct CoarseBounds {
    double fine_min = 0.0;
    double fine_max = 0.0;
    double min_value = 1e-6;
    double margin = 0.0;  ///< keeps thresholds strictly inside (fine_min, fine_max)
};

CoarseBounds coarse_bounds(const ConductivityField& fine);

bool is_admissible(const CoarseControl& zeta, const CoarseBounds& bounds);

/// Projects onto 0 < low < min high and fine_min < threshold < fine_max.
void project_admissible(CoarseControl& zeta, const CoarseBounds& bounds);

}  // namespace eitbin
