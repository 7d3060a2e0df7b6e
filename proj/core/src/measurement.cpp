#include "eitbin/measurement.hpp"

#include "eitbin/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace eitbin {
namespace {

std::vector<double> parse_csv_doubles(const std::string& line) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(cell, &used);
        } catch (const std::exception&) {
            throw IoError("measurement file: not a number: '" + cell + "'");
        }
        for (std::size_t i = used; i < cell.size(); ++i) {
            if (!std::isspace(static_cast<unsigned char>(cell[i]))) {
                throw IoError("measurement file: trailing characters in '" + cell + "'");
            }
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

void write_measurements(std::ostream& out, const MeasurementSet& data) {
    out << std::setprecision(17);
    for (int k = 0; k < data.size(); ++k) {
        for (int l = 0; l < data.size(); ++l) {
            if (l) out << ',';
            out << data(k, l);
        }
        out << '\n';
    }
}

MeasurementSet read_measurements(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        rows.push_back(parse_csv_doubles(line));
    }
    const int m = static_cast<int>(rows.size());
    if (m < 2) throw IoError("measurement file: need at least two rows");
    MeasurementSet data(m);
    for (int k = 0; k < m; ++k) {
        if (static_cast<int>(rows[k].size()) != m) throw IoError("measurement file: matrix is not square");
        for (int l = 0; l < m; ++l) data(k, l) = rows[k][l];
    }
    return data;
}

void save_measurements(const std::string& path, const MeasurementSet& data) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_measurements(out, data);
    if (!out) throw IoError("failed writing " + path);
}

MeasurementSet load_measurements(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return read_measurements(in);
}

void write_measurement_row(std::ostream& out, const MeasurementSet& data) {
    out << std::setprecision(17);
    const auto& v = data.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ',';
        out << v[i];
    }
    out << '\n';
}

MeasurementSet parse_measurement_row(const std::string& line) {
    auto values = parse_csv_doubles(line);
    const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(values.size()))));
    if (m < 2 || static_cast<std::size_t>(m) * m != values.size()) {
        throw IoError("collection data: row length is not a perfect square");
    }
    MeasurementSet data(m);
    data.values() = std::move(values);
    return data;
}

}  // namespace eitbin
