#include "eitbin/field.hpp"

#include "eitbin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace eitbin {

ConductivityField::ConductivityField(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("conductivity must be positive and finite");
    }
}

ConductivityField ConductivityField::uniform(std::size_t elements, double value) {
    return ConductivityField(std::vector<double>(elements, value));
}

double ConductivityField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ConductivityField::max() const { return *std::max_element(values_.begin(), values_.end()); }

void validate_sample(const SampleParam& sample, double domain_radius, int nc_max) {
    const int nc = static_cast<int>(sample.circles.size());
    if (nc < 1 || nc > nc_max) throw DomainError("sample circle count outside [1, nc_max]");
    for (const auto& c : sample.circles) {
        if (!(c.r > 0.0)) throw DomainError("sample circle radius must be positive");
        if (!(std::hypot(c.x, c.y) < domain_radius + c.r)) {
            throw DomainError("sample circle does not intersect the domain");
        }
    }
}

void validate_simplex(std::span<const double> weights) {
    if (weights.empty()) throw ConstraintError("blend weights are empty");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0 && w <= 1.0)) throw ConstraintError("blend weight outside [0, 1]");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-10) throw ConstraintError("blend weights do not sum to one");
}

SampleParam sample_random(Rng& rng, double domain_radius, int nc_max, double r_max_fraction) {
    if (nc_max < 1) throw DomainError("sample_random: nc_max must be >= 1");
    if (!(r_max_fraction > 0.0 && r_max_fraction <= 1.0)) {
        throw DomainError("sample_random: r_max_fraction must lie in (0, 1]");
    }
    std::uniform_int_distribution<int> count(1, nc_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SampleParam sample;
    const int nc = count(rng);
    const double r_max = r_max_fraction * domain_radius;
    for (int j = 0; j < nc; ++j) {
        // 1 - u lies in (0, 1], so r lies in (0, r_max].
        const double r = r_max * (1.0 - unit(rng));
        const double rho = (domain_radius + r) * std::sqrt(unit(rng));
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        sample.circles.push_back({rho * std::cos(phi), rho * std::sin(phi), r});
    }
    return sample;
}

std::vector<double> rasterize_values(const Mesh& mesh, const SampleParam& sample, double high, double low) {
    std::vector<double> values(mesh.num_elements(), low);
    for (const auto& c : sample.circles) {
        const double r2 = c.r * c.r;
        for (std::size_t e = 0; e < values.size(); ++e) {
            const double dx = mesh.centroids[e].x - c.x;
            const double dy = mesh.centroids[e].y - c.y;
            if (dx * dx + dy * dy <= r2) values[e] = high;
        }
    }
    return values;
}

ConductivityField rasterize_sample(const Mesh& mesh, const SampleParam& sample, double high, double low) {
    if (!(high > 0.0) || !(low > 0.0)) throw DomainError("rasterize_sample: conductivities must be positive");
    return ConductivityField(rasterize_values(mesh, sample, high, low));
}

ConductivityField blend(const Mesh& mesh, const BlendControl& control, double high, double low) {
    if (control.basis.size() != control.weights.size()) throw DomainError("blend: basis/weights length mismatch");
    validate_simplex(control.weights);
    std::vector<double> values(mesh.num_elements(), 0.0);
    for (std::size_t i = 0; i < control.basis.size(); ++i) {
        const double w = control.weights[i];
        if (w == 0.0) continue;
        const auto sample = rasterize_values(mesh, control.basis[i], high, low);
        for (std::size_t e = 0; e < values.size(); ++e) values[e] += w * sample[e];
    }
    return ConductivityField(std::move(values));
}

ConductivityField weighted_sum(std::span<const ConductivityField> fields, std::span<const double> weights) {
    if (fields.empty() || fields.size() != weights.size()) throw DomainError("weighted_sum: length mismatch");
    std::vector<double> values(fields.front().size(), 0.0);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].size() != values.size()) throw DomainError("weighted_sum: field length mismatch");
        const double w = weights[i];
        for (std::size_t e = 0; e < values.size(); ++e) values[e] += w * fields[i][e];
    }
    return ConductivityField(std::move(values));
}

ConductivityField make_true_model(const Mesh& mesh, std::span<const Region> regions, double high, double low) {
    if (!(high > 0.0) || !(low > 0.0)) throw DomainError("make_true_model: conductivities must be positive");
    std::vector<double> values(mesh.num_elements(), low);
    for (const auto& region : regions) {
        const double v = region.value.value_or(high);
        if (!(v > 0.0)) throw DomainError("make_true_model: region conductivity must be positive");
        const auto& c = region.circle;
        for (std::size_t e = 0; e < values.size(); ++e) {
            const double dx = mesh.centroids[e].x - c.x;
            const double dy = mesh.centroids[e].y - c.y;
            if (dx * dx + dy * dy <= c.r * c.r) values[e] = v;
        }
    }
    return ConductivityField(std::move(values));
}

Mask read_mask(std::istream& in) {
    Mask mask;
    if (!(in >> mask.rows >> mask.cols) || mask.rows < 1 || mask.cols < 1) {
        throw IoError("mask file: bad header, expected 'rows cols'");
    }
    mask.labels.resize(static_cast<std::size_t>(mask.rows) * mask.cols);
    for (auto& v : mask.labels) {
        if (!(in >> v)) throw IoError("mask file: truncated raster");
        if (v < 0) throw IoError("mask file: labels must be non-negative");
    }
    return mask;
}

Mask load_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return read_mask(in);
}

ConductivityField make_true_model_from_mask(const Mesh& mesh, const Mask& mask, double high, double low,
                                            std::span<const double> label_values) {
    const double side = 2.0 * mesh.radius;
    const double pixel = std::max(side / mask.cols, side / mask.rows);
    double longest_edge = 0.0;
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const Point a = mesh.vertices[t[k]], b = mesh.vertices[t[(k + 1) % 3]];
            longest_edge = std::max(longest_edge, std::hypot(b.x - a.x, b.y - a.y));
        }
    }
    if (pixel > longest_edge) throw DomainError("mask is coarser than the mesh");
    std::vector<double> values(mesh.num_elements(), low);
    for (std::size_t e = 0; e < values.size(); ++e) {
        const Point c = mesh.centroids[e];
        const int col = std::clamp(static_cast<int>((c.x + mesh.radius) / side * mask.cols), 0, mask.cols - 1);
        const int row = std::clamp(static_cast<int>((mesh.radius - c.y) / side * mask.rows), 0, mask.rows - 1);
        const int label = mask.at(row, col);
        if (label == 0) continue;
        values[e] = static_cast<std::size_t>(label) <= label_values.size() ? label_values[label - 1] : high;
    }
    return ConductivityField(std::move(values));
}

double l2_error(const Mesh& mesh, const ConductivityField& a, const ConductivityField& b) {
    if (a.size() != b.size() || a.size() != mesh.num_elements()) throw DomainError("l2_error: length mismatch");
    double sum = 0.0;
    for (std::size_t e = 0; e < a.size(); ++e) {
        const double d = a[e] - b[e];
        sum += mesh.element_areas[e] * d * d;
    }
    return std::sqrt(sum);
}

void write_field(std::ostream& out, const ConductivityField& field) {
    out << std::setprecision(17);
    for (double v : field.values()) out << v << '\n';
}

ConductivityField read_field(std::istream& in) {
    std::vector<double> values;
    std::string token;
    while (in >> token) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(token, &used));
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::logic_error&) {
            throw IoError("field file: not a number: '" + token + "'");
        }
    }
    if (values.empty()) throw IoError("field file is empty");
    try {
        return ConductivityField(std::move(values));
    } catch (const DomainError& e) {
        throw IoError(std::string("field file: ") + e.what());
    }
}

void save_field(const std::string& path, const ConductivityField& field) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_field(out, field);
    if (!out) throw IoError("failed writing " + path);
}

ConductivityField load_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return read_field(in);
}

void write_samples(std::ostream& out, std::span<const SampleParam> samples) {
    out << std::setprecision(17);
    for (const auto& s : samples) {
        out << s.circles.size();
        for (const auto& c : s.circles) out << ' ' << c.x << ' ' << c.y << ' ' << c.r;
        out << '\n';
    }
}

std::vector<SampleParam> read_samples(std::istream& in) {
    std::vector<SampleParam> samples;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        int nc = 0;
        if (!(ls >> nc) || nc < 1) throw IoError("sample file line " + std::to_string(line_no) + ": bad circle count");
        SampleParam s;
        for (int j = 0; j < nc; ++j) {
            Circle c;
            if (!(ls >> c.x >> c.y >> c.r)) {
                throw IoError("sample file line " + std::to_string(line_no) + ": truncated triplet");
            }
            s.circles.push_back(c);
        }
        std::string rest;
        if (ls >> rest) throw IoError("sample file line " + std::to_string(line_no) + ": trailing data");
        samples.push_back(std::move(s));
    }
    return samples;
}

void save_collection(const std::string& sample_path, const std::string& data_path,
                     const SampleCollection& collection) {
    {
        std::ofstream out(sample_path);
        if (!out) throw IoError("cannot write " + sample_path);
        write_samples(out, collection.samples);
        if (!out) throw IoError("failed writing " + sample_path);
    }
    if (collection.data.empty()) return;
    std::ofstream out(data_path);
    if (!out) throw IoError("cannot write " + data_path);
    for (const auto& d : collection.data) write_measurement_row(out, d);
    if (!out) throw IoError("failed writing " + data_path);
}

SampleCollection load_collection(const std::string& sample_path, const std::string& data_path,
                                 ConductivityPair levels) {
    SampleCollection collection;
    collection.levels = levels;
    {
        std::ifstream in(sample_path);
        if (!in) throw IoError("cannot read " + sample_path);
        collection.samples = read_samples(in);
    }
    std::ifstream in(data_path);
    if (!in) throw IoError("cannot read " + data_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        collection.data.push_back(parse_measurement_row(line));
    }
    if (collection.data.size() != collection.samples.size()) {
        throw IoError("collection data has " + std::to_string(collection.data.size()) + " rows for " +
                      std::to_string(collection.samples.size()) + " samples");
    }
    return collection;
}

}  // namespace eitbin
