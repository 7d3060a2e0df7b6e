#include "eitbin/coarse.hpp"

#include "eitbin/errors.hpp"
#include "eitbin/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace eitbin {

CoarseControl::CoarseControl(int n_max, std::vector<double> values) : n_max_(n_max), values_(std::move(values)) {
    if (n_max < 1) throw DomainError("coarse control needs n_max >= 1");
    if (values_.size() != static_cast<std::size_t>(2 * n_max + 1)) {
        throw DomainError("coarse control must have 2 * n_max + 1 components");
    }
}

double PartitionMap::region_area(const Mesh& mesh, int region) const {
    double area = 0.0;
    for (std::size_t e = 0; e < region_of_element.size(); ++e) {
        if (region_of_element[e] == region) area += mesh.element_areas[e];
    }
    return area;
}

int PartitionMap::nonempty_regions() const {
    std::vector<bool> seen(n_max + 1, false);
    for (int r : region_of_element) seen[r] = true;
    return static_cast<int>(std::count(seen.begin() + 1, seen.end(), true));
}

std::vector<std::vector<int>> element_adjacency(const Mesh& mesh) {
    std::map<std::pair<int, int>, int> first_owner;
    std::vector<std::vector<int>> adjacency(mesh.num_elements());
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) {
        const auto& t = mesh.triangles[e];
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            const auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto [it, inserted] = first_owner.emplace(key, e);
            if (!inserted) {
                adjacency[e].push_back(it->second);
                adjacency[it->second].push_back(e);
            }
        }
    }
    return adjacency;
}

namespace {

std::vector<std::vector<int>> components_with(const std::vector<std::vector<int>>& adjacency,
                                              const std::vector<bool>& mask) {
    std::vector<std::vector<int>> components;
    std::vector<bool> visited(mask.size(), false);
    std::vector<int> stack;
    for (int seed = 0; seed < static_cast<int>(mask.size()); ++seed) {
        if (!mask[seed] || visited[seed]) continue;
        std::vector<int> component;
        stack.push_back(seed);
        visited[seed] = true;
        while (!stack.empty()) {
            const int e = stack.back();
            stack.pop_back();
            component.push_back(e);
            for (int nb : adjacency[e]) {
                if (mask[nb] && !visited[nb]) {
                    visited[nb] = true;
                    stack.push_back(nb);
                }
            }
        }
        std::sort(component.begin(), component.end());
        components.push_back(std::move(component));
    }
    return components;
}

double area_of(const Mesh& mesh, const std::vector<int>& elements) {
    double a = 0.0;
    for (int e : elements) a += mesh.element_areas[e];
    return a;
}

}  // namespace

std::vector<std::vector<int>> connected_components(const Mesh& mesh, const std::vector<bool>& mask) {
    if (mask.size() != mesh.num_elements()) throw DomainError("component mask length mismatch");
    return components_with(element_adjacency(mesh), mask);
}

PartitionMap partition_field(const Mesh& mesh, const ConductivityField& fine, const CoarseControl& zeta,
                             const PartitionMap* previous) {
    const std::size_t n = mesh.num_elements();
    if (fine.size() != n) throw DomainError("partition_field: field length mismatch");
    const int n_max = zeta.n_max();
    PartitionMap map{n_max, std::vector<int>(n, 0)};
    const auto adjacency = element_adjacency(mesh);

    if (previous == nullptr) {
        const double t = zeta.threshold(1);
        std::vector<bool> mask(n);
        for (std::size_t e = 0; e < n; ++e) mask[e] = fine[e] >= t;
        auto components = components_with(adjacency, mask);
        if (components.empty()) {
            log::warn("partition_field: no element reaches the threshold; all elements are background");
            return map;
        }
        std::vector<double> areas;
        for (const auto& c : components) areas.push_back(area_of(mesh, c));
        std::vector<std::size_t> order(components.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return areas[a] > areas[b]; });
        for (int r = 0; r < n_max && r < static_cast<int>(order.size()); ++r) {
            for (int e : components[order[r]]) map.region_of_element[e] = r + 1;
        }
        return map;
    }

    if (previous->region_of_element.size() != n || previous->n_max != n_max) {
        throw DomainError("partition_field: previous partition does not match");
    }
    std::vector<bool> claimed(n, false);
    std::vector<bool> was_empty(n_max + 1, true);
    for (int label : previous->region_of_element) {
        if (label > 0 && label <= n_max) was_empty[label] = false;
    }
    bool any = false;
    auto assign = [&](int region, const std::vector<int>& component) {
        any = true;
        for (int e : component) {
            map.region_of_element[e] = region;
            claimed[e] = true;
        }
    };
    auto candidates = [&](int region) {
        const double t = zeta.threshold(region);
        std::vector<bool> mask(n);
        for (std::size_t e = 0; e < n; ++e) mask[e] = !claimed[e] && fine[e] >= t;
        return components_with(adjacency, mask);
    };
    for (int region = 1; region <= n_max; ++region) {
        if (was_empty[region]) continue;
        const auto components = candidates(region);
        int best = -1;
        double best_overlap = 0.0;
        double best_area = 0.0;
        for (int c = 0; c < static_cast<int>(components.size()); ++c) {
            double overlap = 0.0;
            for (int e : components[c]) {
                if (previous->region_of_element[e] == region) overlap += mesh.element_areas[e];
            }
            if (overlap <= 0.0) continue;
            const double area = area_of(mesh, components[c]);
            if (overlap > best_overlap || (overlap == best_overlap && area > best_area)) {
                best = c;
                best_overlap = overlap;
                best_area = area;
            }
        }
        if (best >= 0) assign(region, components[best]);
    }
    // An empty region adopts the largest unclaimed component that touches no
    // other previous region.
    for (int region = 1; region <= n_max; ++region) {
        if (!was_empty[region]) continue;
        const auto components = candidates(region);
        int best = -1;
        double best_area = 0.0;
        for (int c = 0; c < static_cast<int>(components.size()); ++c) {
            const bool foreign = std::any_of(components[c].begin(), components[c].end(),
                                             [&](int e) { return previous->region_of_element[e] != 0; });
            if (foreign) continue;
            const double area = area_of(mesh, components[c]);
            if (area > best_area) {
                best = c;
                best_area = area;
            }
        }
        if (best >= 0) assign(region, components[best]);
    }
    if (!any) log::warn("partition_field: every region vanished; all elements are background");
    return map;
}

CoarseControl init_zeta(const Mesh& mesh, const ConductivityField& fine, const PartitionMap& partition) {
    const std::size_t n = mesh.num_elements();
    if (fine.size() != n || partition.region_of_element.size() != n) {
        throw DomainError("init_zeta: field/partition length mismatch");
    }
    const int n_max = partition.n_max;
    CoarseControl zeta(n_max);
    const double lo = fine.min();
    const double hi = fine.max();
    const double mid = 0.5 * (hi + lo);
    const double offset = (hi > lo) ? 1e-3 * (hi - lo) : 1e-6 * std::abs(mid);

    double low_sum = 0.0;
    int low_count = 0;
    std::vector<double> high_sum(n_max + 1, 0.0);
    std::vector<int> high_count(n_max + 1, 0);
    for (std::size_t e = 0; e < n; ++e) {
        const double v = fine[e];
        if (v < mid) {
            low_sum += v;
            ++low_count;
        }
        const int r = partition.region_of_element[e];
        if (r > 0 && v >= mid) {
            high_sum[r] += v;
            ++high_count[r];
        }
    }
    if (low_count > 0) {
        zeta.low() = low_sum / low_count;
    } else {
        log::warn("init_zeta: no sub-threshold elements; low value set just below the threshold");
        zeta.low() = mid - offset;
    }
    for (int r = 1; r <= n_max; ++r) {
        zeta.threshold(r) = mid;
        if (high_count[r] > 0) {
            zeta.high(r) = high_sum[r] / high_count[r];
        } else {
            log::warn("init_zeta: region " + std::to_string(r) + " is empty; high value set just above the threshold");
            zeta.high(r) = mid + offset;
        }
    }
    return zeta;
}

ConductivityField coarse_field(const PartitionMap& partition, const CoarseControl& zeta) {
    if (partition.n_max != zeta.n_max()) throw DomainError("coarse_field: n_max mismatch");
    std::vector<double> values(partition.region_of_element.size());
    for (std::size_t e = 0; e < values.size(); ++e) {
        const int r = partition.region_of_element[e];
        values[e] = (r == 0) ? zeta.low() : zeta.high(r);
    }
    return ConductivityField(std::move(values));
}

CoarseBounds coarse_bounds(const ConductivityField& fine) {
    CoarseBounds b;
    b.fine_min = fine.min();
    b.fine_max = fine.max();
    b.margin = 1e-6 * (b.fine_max - b.fine_min);
    b.min_value = 1e-6 * b.fine_min;
    return b;
}

bool is_admissible(const CoarseControl& zeta, const CoarseBounds& bounds) {
    if (!(zeta.low() > 0.0)) return false;
    for (int r = 1; r <= zeta.n_max(); ++r) {
        if (!(zeta.low() < zeta.high(r))) return false;
        if (!(zeta.threshold(r) > bounds.fine_min && zeta.threshold(r) < bounds.fine_max)) return false;
    }
    return true;
}

void project_admissible(CoarseControl& zeta, const CoarseBounds& bounds) {
    double min_high = std::numeric_limits<double>::infinity();
    for (int r = 1; r <= zeta.n_max(); ++r) {
        zeta.high(r) = std::max(zeta.high(r), 2.0 * bounds.min_value);
        min_high = std::min(min_high, zeta.high(r));
        zeta.threshold(r) = std::clamp(zeta.threshold(r), bounds.fine_min + bounds.margin,
                                       bounds.fine_max - bounds.margin);
    }
    zeta.low() = std::clamp(zeta.low(), bounds.min_value, min_high * (1.0 - 1e-9));
}

}  // namespace eitbin
