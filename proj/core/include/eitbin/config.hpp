#pragma once

#include "eitbin/field.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace eitbin {

struct MeshConfig {
    double radius = 0.1;
    int target_elements = 7726;
    bool operator==(const MeshConfig&) const = default;
};

struct ElectrodeConfig {
    int count = 16;
    double half_width = 0.12;
    double impedance = 0.1;
    bool operator==(const ElectrodeConfig&) const = default;
};

/// Exactly one source: circles, a mask file, or a measurement file.
struct ModelConfig {
    std::vector<Region> circles;
    std::string mask_file;
    std::vector<double> mask_values;  ///< per-label overrides for the mask
    std::string measurement_file;
    double sigma_c = 0.4;
    double sigma_h = 0.2;
    bool operator==(const ModelConfig&) const = default;
};

/// Either load `file` + `data_file`, or generate `size` samples.
struct CollectionConfig {
    std::string file;
    std::string data_file;
    int size = 10000;
    int nc_max = 8;
    double r_max_fraction = 0.3;
    double sigma_c = 0.4;
    double sigma_h = 0.2;
    bool operator==(const CollectionConfig&) const = default;
};

struct OptimizerConfig {
    std::string method = "projected-gradient";  ///< or "coordinate-descent"
    double tolerance = 1e-9;
    long max_cost_evals = 50000;
    long coarse_max_cost_evals = 50000;
    double delta_p = 1e-3;
    double delta_zeta = 0.0;  ///< 0: 1e-3 * fine range
    int n_s = 10;
    int n_max = 3;
    bool operator==(const OptimizerConfig&) const = default;
};

struct RunConfig {
    MeshConfig mesh;
    ElectrodeConfig electrodes;
    std::vector<double> base_pattern;
    ModelConfig model;
    double noise_level = 0.005;
    std::uint64_t seed = 1;
    CollectionConfig collection;
    OptimizerConfig optimizer;
    std::string output_dir = "out";
    int threads = 0;  ///< 0: decided by the caller

    RunConfig();
    bool operator==(const RunConfig&) const = default;
};

/// `key = value` lines; `#` starts a comment. Unknown keys and malformed
/// values raise ConfigError naming the key. The result is validated.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Every key, in a fixed order, with round-trip exact numbers.
void write_config(std::ostream& out, const RunConfig& config);
std::string serialize_config(const RunConfig& config);

/// Throws ConfigError for the first violated rule.
void validate_config(const RunConfig& config);

/// Three circles used as the default synthetic model.
std::vector<Region> model1_circles();

}  // namespace eitbin
