#pragma once

#include "eitbin/geometry.hpp"
#include "eitbin/measurement.hpp"
#include "eitbin/rng.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eitbin {

/// Piecewise-constant, strictly positive conductivity, one value per triangle.
class ConductivityField {
public:
    ConductivityField() = default;
    /// Throws DomainError if any value is not strictly positive and finite.
    explicit ConductivityField(std::vector<double> values);
    static ConductivityField uniform(std::size_t elements, double value);

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t e) const { return values_[e]; }
    std::span<const double> values() const { return values_; }
    double min() const;
    double max() const;

    bool operator==(const ConductivityField&) const = default;

private:
    std::vector<double> values_;
};

struct Circle {
    double x = 0.0;
    double y = 0.0;
    double r = 0.0;
    bool operator==(const Circle&) const = default;
};

/// One candidate image: the union of its circles is "high" conductivity.
struct SampleParam {
    std::vector<Circle> circles;
    bool operator==(const SampleParam&) const = default;
};

/// Conductivity levels used to render samples: high inside circles, low outside.
struct ConductivityPair {
    double high = 0.4;
    double low = 0.2;
    bool operator==(const ConductivityPair&) const = default;
};

struct SampleCollection {
    std::vector<SampleParam> samples;
    ConductivityPair levels;
    /// Empty until precomputed; otherwise one entry per sample.
    std::vector<MeasurementSet> data;
};

struct BlendControl {
    std::vector<SampleParam> basis;
    std::vector<double> weights;
};

/// Throws DomainError when a sample violates 1 <= N_c <= nc_max, r > 0 or
/// |center| < R + r.
void validate_sample(const SampleParam& sample, double domain_radius, int nc_max);

/// Throws ConstraintError unless 0 <= w_i <= 1 and |sum w - 1| <= 1e-10.
void validate_simplex(std::span<const double> weights);

/// Random sample: N_c uniform in {1..nc_max}, r uniform in (0, r_max_fraction*R],
/// centre uniform over the disc of radius R + r.
SampleParam sample_random(Rng& rng, double domain_radius, int nc_max, double r_max_fraction);

/// Raw rendering: value per element is `high` when the centroid lies inside
/// any circle, `low` otherwise.
std::vector<double> rasterize_values(const Mesh& mesh, const SampleParam& sample, double high, double low);
ConductivityField rasterize_sample(const Mesh& mesh, const SampleParam& sample, double high, double low);

/// Convex combination sum_i w_i * rasterize(basis_i). Validates the simplex.
ConductivityField blend(const Mesh& mesh, const BlendControl& control, double high, double low);

/// sum_i w_i * fields_i without simplex checks (weights may leave the simplex
/// during finite-difference probes). Throws DomainError if a value is <= 0.
ConductivityField weighted_sum(std::span<const ConductivityField> fields, std::span<const double> weights);

struct Region {
    Circle circle;
    /// Per-region conductivity; falls back to the model's high value.
    std::optional<double> value;
    bool operator==(const Region&) const = default;
};

ConductivityField make_true_model(const Mesh& mesh, std::span<const Region> regions, double high, double low);

/// Integer raster over the square [-R, R]^2, row 0 at the top (y = +R).
/// Label 0 is background; label j > 0 selects `label_values[j-1]` or `high`.
struct Mask {
    int rows = 0;
    int cols = 0;
    std::vector<int> labels;
    int at(int row, int col) const { return labels[static_cast<std::size_t>(row) * cols + col]; }
};

/// Format: header `rows cols`, then `rows` lines of `cols` whitespace-separated labels.
Mask read_mask(std::istream& in);
Mask load_mask(const std::string& path);

/// Samples the mask at element centroids. Throws DomainError when the mask is
/// coarser than the mesh (pixel side larger than the longest element edge).
ConductivityField make_true_model_from_mask(const Mesh& mesh, const Mask& mask, double high, double low,
                                            std::span<const double> label_values = {});

/// sqrt(sum_e area_e * (a_e - b_e)^2).
double l2_error(const Mesh& mesh, const ConductivityField& a, const ConductivityField& b);

/// One value per line, 17 significant digits.
void write_field(std::ostream& out, const ConductivityField& field);
ConductivityField read_field(std::istream& in);
void save_field(const std::string& path, const ConductivityField& field);
ConductivityField load_field(const std::string& path);

/// Line format: `N_c x1 y1 r1 x2 y2 r2 ...`, 17 significant digits.
void write_samples(std::ostream& out, std::span<const SampleParam> samples);
std::vector<SampleParam> read_samples(std::istream& in);

/// Sample file plus the companion data file (one row of m*m currents per sample).
void save_collection(const std::string& sample_path, const std::string& data_path, const SampleCollection& collection);
SampleCollection load_collection(const std::string& sample_path, const std::string& data_path,
                                 ConductivityPair levels);

}  // namespace eitbin
