#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace eitbin {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct BoundaryEdge {
    int a = 0;  ///< first vertex, counter-clockwise order along the boundary
    int b = 0;
    double mid_angle = 0.0;  ///< polar angle of the edge midpoint, in [0, 2pi)
    double length = 0.0;
};

/// Triangulated disc. Triangles are counter-clockwise; boundary edges form one
/// closed counter-clockwise loop.
struct Mesh {
    double radius = 0.0;
    std::vector<Point> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<double> element_areas;
    std::vector<Point> centroids;
    std::vector<BoundaryEdge> boundary_edges;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_elements() const { return triangles.size(); }
    double total_area() const;
    /// Area enclosed by the boundary polygon (shoelace formula).
    double boundary_polygon_area() const;
    double boundary_perimeter() const;
};

struct MeshOptions {
    /// Every ring carries a multiple of this many vertices, so the mesh is
    /// invariant under rotation by 2*pi/angular_multiple.
    int angular_multiple = 16;
};

/// Structured polar mesh of the disc |x| < radius with roughly
/// `target_elements` triangles (within 20%).
Mesh build_disc_mesh(double radius, int target_elements, const MeshOptions& options = {});

/// Rebuilds areas, centroids and the boundary loop from vertices/triangles.
/// Throws DomainError when the triangulation is not a valid disc mesh.
Mesh finalize_mesh(double radius, std::vector<Point> vertices, std::vector<std::array<int, 3>> triangles);

/// Plain-text mesh format: `vertices N triangles M`, N lines `x y`, M lines `i j k`.
void write_mesh(std::ostream& out, const Mesh& mesh);
Mesh read_mesh(std::istream& in);
void save_mesh(const std::string& path, const Mesh& mesh);
Mesh load_mesh(const std::string& path);

struct ElectrodeLayout {
    int m = 0;
    double half_width = 0.0;
    std::vector<double> center_angles;
    std::vector<double> contact_impedance;
    /// Indices into Mesh::boundary_edges owned by each electrode.
    std::vector<std::vector<int>> electrode_edges;

    /// Summed chord length of an electrode's edges.
    double electrode_length(const Mesh& mesh, int electrode) const;
    double coverage_fraction() const;
};

/// Equidistant electrodes centred at 2*pi*l/m (l = 0..m-1). An edge belongs to
/// an electrode iff its midpoint angle lies within half_width of the centre.
ElectrodeLayout place_electrodes(const Mesh& mesh, int m, double half_width, double impedance);

/// Exact integral of the piecewise-linear interpolant of `nodal_values` over
/// the edges of electrode `electrode` (0-based).
double electrode_boundary_integral(const Mesh& mesh, const ElectrodeLayout& layout, int electrode,
                                   std::span<const double> nodal_values);

/// Index of the triangle containing `p`, or -1. Linear scan; use MeshLocator
/// for repeated queries.
int locate_point(const Mesh& mesh, Point p);

/// Uniform bucket grid over the mesh bounding box for repeated point location.
class MeshLocator {
public:
    explicit MeshLocator(const Mesh& mesh, int buckets_per_side = 0);
    int locate(Point p) const;

private:
    const Mesh* mesh_;
    int n_;
    double x0_, y0_, cell_;
    std::vector<std::vector<int>> buckets_;
};

/// Angle of `p` mapped to [0, 2pi).
double polar_angle(Point p);
/// Signed smallest difference a - b in (-pi, pi].
double angle_difference(double a, double b);

}  // namespace eitbin
