#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace eitbin {

/// m x m electrode currents; entry (k, l) is the current through electrode l
/// under the k-th rotated excitation pattern.
class MeasurementSet {
public:
    MeasurementSet() = default;
    explicit MeasurementSet(int m) : m_(m), values_(static_cast<std::size_t>(m) * m, 0.0) {}

    int size() const { return m_; }
    double& operator()(int k, int l) { return values_[static_cast<std::size_t>(k) * m_ + l]; }
    double operator()(int k, int l) const { return values_[static_cast<std::size_t>(k) * m_ + l]; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    bool operator==(const MeasurementSet&) const = default;

private:
    int m_ = 0;
    std::vector<double> values_;
};

/// m lines of m comma-separated currents, 17 significant digits.
void write_measurements(std::ostream& out, const MeasurementSet& data);
MeasurementSet read_measurements(std::istream& in);
void save_measurements(const std::string& path, const MeasurementSet& data);
MeasurementSet load_measurements(const std::string& path);

/// One measurement set per line, m*m comma-separated values (row-major).
void write_measurement_row(std::ostream& out, const MeasurementSet& data);
MeasurementSet parse_measurement_row(const std::string& line);

}  // namespace eitbin
