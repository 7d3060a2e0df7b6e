#include "eitbin/geometry.hpp"

#include "eitbin/errors.hpp"
#include "eitbin/log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <utility>

namespace eitbin {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double signed_area(Point a, Point b, Point c) {
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double distance(Point a, Point b) { return std::hypot(b.x - a.x, b.y - a.y); }

// Vertex count of every ring k = 1..rings for a given density scale.
std::vector<int> ring_counts(int rings, double density, int multiple) {
    const int min_count = multiple * ((4 + multiple - 1) / multiple);
    std::vector<int> counts(rings);
    int previous = min_count;
    for (int k = 1; k <= rings; ++k) {
        const double ideal = density * kTwoPi * k / multiple;
        int n = multiple * static_cast<int>(std::lround(ideal));
        n = std::max({n, min_count, previous});
        counts[k - 1] = n;
        previous = n;
    }
    return counts;
}

long triangle_count(const std::vector<int>& counts) {
    long total = counts.front();
    for (std::size_t k = 1; k < counts.size(); ++k) total += counts[k - 1] + counts[k];
    return total;
}

struct RingPlan {
    std::vector<int> counts;
    double error = std::numeric_limits<double>::infinity();
    double density_penalty = 0.0;
};

RingPlan plan_rings(int target, int multiple) {
    RingPlan best;
    const int max_rings = static_cast<int>(std::sqrt(static_cast<double>(target))) + 2;
    for (int rings = 1; rings <= max_rings; ++rings) {
        for (int step = 0; step <= 70; ++step) {
            const double density = 0.7 + 0.01 * step;
            auto counts = ring_counts(rings, density, multiple);
            const double err = std::abs(static_cast<double>(triangle_count(counts) - target)) / target;
            const double penalty = std::abs(density - 1.0);
            if (err < best.error - 1e-12 || (std::abs(err - best.error) <= 1e-12 && penalty < best.density_penalty)) {
                best = {std::move(counts), err, penalty};
            }
        }
    }
    return best;
}

}  // namespace

double polar_angle(Point p) {
    double a = std::atan2(p.y, p.x);
    if (a < 0.0) a += kTwoPi;
    if (a >= kTwoPi) a -= kTwoPi;
    return a;
}

double angle_difference(double a, double b) {
    double d = std::fmod(a - b, kTwoPi);
    if (d <= -std::numbers::pi) d += kTwoPi;
    if (d > std::numbers::pi) d -= kTwoPi;
    return d;
}

double Mesh::total_area() const {
    double sum = 0.0;
    for (double a : element_areas) sum += a;
    return sum;
}

double Mesh::boundary_polygon_area() const {
    double twice = 0.0;
    for (const auto& e : boundary_edges) {
        const Point p = vertices[e.a];
        const Point q = vertices[e.b];
        twice += p.x * q.y - q.x * p.y;
    }
    return 0.5 * twice;
}

double Mesh::boundary_perimeter() const {
    double sum = 0.0;
    for (const auto& e : boundary_edges) sum += e.length;
    return sum;
}

Mesh build_disc_mesh(double radius, int target_elements, const MeshOptions& options) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("build_disc_mesh: radius must be positive");
    if (target_elements < 16) throw DomainError("build_disc_mesh: target_elements must be at least 16");
    if (options.angular_multiple < 1) throw DomainError("build_disc_mesh: angular_multiple must be >= 1");

    // Fall back to coarser rotational symmetry when the requested multiple
    // cannot hit the element target.
    RingPlan plan;
    for (int multiple = options.angular_multiple; multiple >= 1; multiple /= 2) {
        plan = plan_rings(target_elements, multiple);
        if (plan.error <= 0.2) {
            if (multiple != options.angular_multiple) {
                log::info("build_disc_mesh: reduced angular multiple to " + std::to_string(multiple));
            }
            break;
        }
        if (multiple == 1) break;
    }
    if (plan.error > 0.2) throw DomainError("build_disc_mesh: cannot reach target element count");

    const int rings = static_cast<int>(plan.counts.size());
    std::vector<Point> vertices;
    vertices.push_back({0.0, 0.0});
    std::vector<int> ring_start(rings);
    for (int k = 1; k <= rings; ++k) {
        const int n = plan.counts[k - 1];
        const double r = (k == rings) ? radius : radius * k / rings;
        ring_start[k - 1] = static_cast<int>(vertices.size());
        for (int j = 0; j < n; ++j) {
            const double theta = kTwoPi * j / n;
            vertices.push_back({r * std::cos(theta), r * std::sin(theta)});
        }
    }

    std::vector<std::array<int, 3>> triangles;
    auto add = [&](int a, int b, int c) {
        if (signed_area(vertices[a], vertices[b], vertices[c]) < 0.0) std::swap(b, c);
        triangles.push_back({a, b, c});
    };

    const int n1 = plan.counts[0];
    for (int j = 0; j < n1; ++j) add(0, ring_start[0] + j, ring_start[0] + (j + 1) % n1);

    for (int k = 1; k < rings; ++k) {
        const int na = plan.counts[k - 1];
        const int nb = plan.counts[k];
        const int ia = ring_start[k - 1];
        const int ib = ring_start[k];
        int i = 0;
        int j = 0;
        // Sweep both rings by angle; comparisons are exact integer ratios so
        // every angular sector is triangulated identically.
        while (i < na || j < nb) {
            const bool advance_inner =
                (j == nb) || (i < na && static_cast<long>(i + 1) * nb <= static_cast<long>(j + 1) * na);
            if (advance_inner) {
                add(ia + i % na, ia + (i + 1) % na, ib + j % nb);
                ++i;
            } else {
                add(ia + i % na, ib + j % nb, ib + (j + 1) % nb);
                ++j;
            }
        }
    }

    return finalize_mesh(radius, std::move(vertices), std::move(triangles));
}

Mesh finalize_mesh(double radius, std::vector<Point> vertices, std::vector<std::array<int, 3>> triangles) {
    if (!(radius > 0.0)) throw DomainError("mesh radius must be positive");
    Mesh mesh;
    mesh.radius = radius;
    mesh.vertices = std::move(vertices);
    mesh.triangles = std::move(triangles);
    const int nv = static_cast<int>(mesh.vertices.size());
    const double limit = radius * (1.0 + 1e-12);
    for (const auto& v : mesh.vertices) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw DomainError("mesh vertex is not finite");
        if (std::hypot(v.x, v.y) > limit) throw DomainError("mesh vertex lies outside the disc");
    }

    mesh.element_areas.reserve(mesh.triangles.size());
    mesh.centroids.reserve(mesh.triangles.size());
    // Directed edge -> count of occurrences; boundary edges occur once.
    std::map<std::pair<int, int>, int> edge_use;
    for (auto& t : mesh.triangles) {
        for (int idx : t) {
            if (idx < 0 || idx >= nv) throw DomainError("triangle references a missing vertex");
        }
        double area = signed_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        if (area < 0.0) {
            std::swap(t[1], t[2]);
            area = -area;
        }
        if (!(area > 0.0)) throw DomainError("degenerate triangle with zero area");
        mesh.element_areas.push_back(area);
        const Point a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
        mesh.centroids.push_back({(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0});
        for (int e = 0; e < 3; ++e) {
            const int p = t[e], q = t[(e + 1) % 3];
            ++edge_use[{std::min(p, q), std::max(p, q)}];
        }
    }

    // Boundary edges, oriented as they appear in their (counter-clockwise) triangle.
    std::map<int, int> next_of;
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            const int p = t[e], q = t[(e + 1) % 3];
            const int uses = edge_use[{std::min(p, q), std::max(p, q)}];
            if (uses > 2) throw DomainError("non-manifold edge in mesh");
            if (uses == 1) {
                if (!next_of.emplace(p, q).second) throw DomainError("boundary is not a simple loop");
            }
        }
    }
    if (next_of.size() < 3) throw DomainError("mesh has no closed boundary");

    // Start at the edge whose midpoint angle is smallest, for a deterministic order.
    auto mid_angle = [&](int p, int q) {
        const Point a = mesh.vertices[p], b = mesh.vertices[q];
        return polar_angle({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
    };
    int start = next_of.begin()->first;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [p, q] : next_of) {
        const double a = mid_angle(p, q);
        if (a < best) {
            best = a;
            start = p;
        }
    }
    int p = start;
    do {
        auto it = next_of.find(p);
        if (it == next_of.end()) throw DomainError("boundary loop is broken");
        const int q = it->second;
        mesh.boundary_edges.push_back({p, q, mid_angle(p, q), distance(mesh.vertices[p], mesh.vertices[q])});
        p = q;
        if (mesh.boundary_edges.size() > next_of.size()) throw DomainError("boundary loop is broken");
    } while (p != start);
    if (mesh.boundary_edges.size() != next_of.size()) {
        throw DomainError("boundary edges do not form a single closed loop");
    }
    return mesh;
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
    out << "vertices " << mesh.vertices.size() << " triangles " << mesh.triangles.size() << '\n';
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << v.x << ' ' << v.y << '\n';
    for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

Mesh read_mesh(std::istream& in) {
    std::string w1, w2;
    long nv = -1, nt = -1;
    if (!(in >> w1 >> nv >> w2 >> nt) || w1 != "vertices" || w2 != "triangles" || nv < 3 || nt < 1) {
        throw IoError("mesh file: bad header, expected 'vertices N triangles M'");
    }
    std::vector<Point> vertices(nv);
    double max_r = 0.0;
    for (auto& v : vertices) {
        if (!(in >> v.x >> v.y)) throw IoError("mesh file: truncated vertex list");
        max_r = std::max(max_r, std::hypot(v.x, v.y));
    }
    std::vector<std::array<int, 3>> triangles(nt);
    for (auto& t : triangles) {
        if (!(in >> t[0] >> t[1] >> t[2])) throw IoError("mesh file: truncated triangle list");
    }
    try {
        return finalize_mesh(max_r, std::move(vertices), std::move(triangles));
    } catch (const DomainError& e) {
        throw IoError(std::string("mesh file: ") + e.what());
    }
}

void save_mesh(const std::string& path, const Mesh& mesh) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_mesh(out, mesh);
    if (!out) throw IoError("failed writing " + path);
}

Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return read_mesh(in);
}

double ElectrodeLayout::electrode_length(const Mesh& mesh, int electrode) const {
    double sum = 0.0;
    for (int e : electrode_edges.at(electrode)) sum += mesh.boundary_edges[e].length;
    return sum;
}

double ElectrodeLayout::coverage_fraction() const { return m * 2.0 * half_width / kTwoPi; }

ElectrodeLayout place_electrodes(const Mesh& mesh, int m, double half_width, double impedance) {
    if (m < 2) throw DomainError("place_electrodes: need at least two electrodes");
    if (!(half_width > 0.0)) throw DomainError("place_electrodes: half_width must be positive");
    if (!(impedance > 0.0)) throw DomainError("place_electrodes: contact impedance must be positive");
    if (m * 2.0 * half_width >= kTwoPi) {
        throw LayoutError("place_electrodes: electrode arcs overlap (m * 2 * half_width >= 2 pi)");
    }
    ElectrodeLayout layout;
    layout.m = m;
    layout.half_width = half_width;
    layout.contact_impedance.assign(m, impedance);
    layout.electrode_edges.resize(m);
    for (int l = 0; l < m; ++l) layout.center_angles.push_back(kTwoPi * l / m);
    for (int e = 0; e < static_cast<int>(mesh.boundary_edges.size()); ++e) {
        const double mid = mesh.boundary_edges[e].mid_angle;
        for (int l = 0; l < m; ++l) {
            if (std::abs(angle_difference(mid, layout.center_angles[l])) <= half_width) {
                layout.electrode_edges[l].push_back(e);
                break;
            }
        }
    }
    for (int l = 0; l < m; ++l) {
        if (layout.electrode_edges[l].empty()) {
            throw LayoutError("place_electrodes: electrode " + std::to_string(l) +
                              " captures no boundary edge; refine the mesh");
        }
    }
    return layout;
}

double electrode_boundary_integral(const Mesh& mesh, const ElectrodeLayout& layout, int electrode,
                                   std::span<const double> nodal_values) {
    if (electrode < 0 || electrode >= layout.m) throw DomainError("electrode index out of range");
    if (nodal_values.size() != mesh.num_vertices()) throw DomainError("nodal_values length mismatch");
    double sum = 0.0;
    for (int e : layout.electrode_edges[electrode]) {
        const auto& edge = mesh.boundary_edges[e];
        sum += 0.5 * edge.length * (nodal_values[edge.a] + nodal_values[edge.b]);
    }
    return sum;
}

namespace {
bool contains(const Mesh& mesh, int t, Point p) {
    const auto& tri = mesh.triangles[t];
    const Point a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]], c = mesh.vertices[tri[2]];
    const double tol = -1e-12 * mesh.element_areas[t];
    return signed_area(a, b, p) >= tol && signed_area(b, c, p) >= tol && signed_area(c, a, p) >= tol;
}
}  // namespace

int locate_point(const Mesh& mesh, Point p) {
    for (int t = 0; t < static_cast<int>(mesh.num_elements()); ++t) {
        if (contains(mesh, t, p)) return t;
    }
    return -1;
}

MeshLocator::MeshLocator(const Mesh& mesh, int buckets_per_side) : mesh_(&mesh) {
    n_ = buckets_per_side > 0
             ? buckets_per_side
             : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_elements()) / 2.0)));
    x0_ = -mesh.radius;
    y0_ = -mesh.radius;
    cell_ = 2.0 * mesh.radius / n_;
    buckets_.resize(static_cast<std::size_t>(n_) * n_);
    auto clamp_cell = [&](double v) { return std::clamp(static_cast<int>(std::floor(v / cell_)), 0, n_ - 1); };
    for (int t = 0; t < static_cast<int>(mesh.num_elements()); ++t) {
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        for (int v : mesh.triangles[t]) {
            xmin = std::min(xmin, mesh.vertices[v].x);
            xmax = std::max(xmax, mesh.vertices[v].x);
            ymin = std::min(ymin, mesh.vertices[v].y);
            ymax = std::max(ymax, mesh.vertices[v].y);
        }
        for (int i = clamp_cell(xmin - x0_); i <= clamp_cell(xmax - x0_); ++i) {
            for (int j = clamp_cell(ymin - y0_); j <= clamp_cell(ymax - y0_); ++j) {
                buckets_[static_cast<std::size_t>(j) * n_ + i].push_back(t);
            }
        }
    }
}

int MeshLocator::locate(Point p) const {
    const int i = static_cast<int>(std::floor((p.x - x0_) / cell_));
    const int j = static_cast<int>(std::floor((p.y - y0_) / cell_));
    if (i < 0 || j < 0 || i >= n_ || j >= n_) return -1;
    for (int t : buckets_[static_cast<std::size_t>(j) * n_ + i]) {
        if (contains(*mesh_, t, p)) return t;
    }
    return -1;
}

}  // namespace eitbin
