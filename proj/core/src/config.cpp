#include "eitbin/config.hpp"

#include "eitbin/errors.hpp"
#include "eitbin/fem.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace eitbin {

RunConfig::RunConfig() : base_pattern(default_voltage_pattern()) {}

std::vector<Region> model1_circles() {
    return {
        {{0.04, 0.03, 0.03}, std::nullopt},
        {{-0.035, -0.03, 0.022}, std::nullopt},
        {{-0.03, 0.045, 0.013}, std::nullopt},
    };
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw ConfigError(key, "expected a number, got '" + t + "'");
    }
    return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    Int v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw ConfigError(key, "expected an integer, got '" + t + "'");
    }
    return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::string s = text;
    for (char& c : s) {
        if (c == ',') c = ' ';
    }
    std::istringstream in(s);
    std::vector<double> out;
    std::string token;
    while (in >> token) out.push_back(parse_double(key, token));
    return out;
}

std::string format_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += format(v[i]);
    }
    return s;
}

std::vector<Region> parse_circles(const std::string& key, const std::string& text) {
    std::vector<Region> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ';')) {
        if (trim(item).empty()) continue;
        const auto nums = parse_list(key, item);
        if (nums.size() != 3 && nums.size() != 4) {
            throw ConfigError(key, "each circle needs 'x y r' or 'x y r value', got '" + trim(item) + "'");
        }
        Region r{{nums[0], nums[1], nums[2]}, std::nullopt};
        if (nums.size() == 4) r.value = nums[3];
        out.push_back(r);
    }
    return out;
}

std::string format_circles(const std::vector<Region>& regions) {
    std::string s;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        if (i) s += "; ";
        const auto& c = regions[i].circle;
        s += format(c.x) + " " + format(c.y) + " " + format(c.r);
        if (regions[i].value) s += " " + format(*regions[i].value);
    }
    return s;
}

struct Field {
    std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define EITBIN_DOUBLE(member) \
    Field { [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); }, \
            [](const RunConfig& c) { return format(c.member); } }
#define EITBIN_INT(member, type) \
    Field { [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_int<type>(k, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); } }
#define EITBIN_STRING(member) \
    Field { [](RunConfig& c, const std::string&, const std::string& v) { c.member = trim(v); }, \
            [](const RunConfig& c) { return c.member; } }

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        {"mesh.radius", EITBIN_DOUBLE(mesh.radius)},
        {"mesh.target_elements", EITBIN_INT(mesh.target_elements, int)},
        {"electrodes.count", EITBIN_INT(electrodes.count, int)},
        {"electrodes.half_width", EITBIN_DOUBLE(electrodes.half_width)},
        {"electrodes.impedance", EITBIN_DOUBLE(electrodes.impedance)},
        {"excitation.base_pattern",
         Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.base_pattern = parse_list(k, v); },
               [](const RunConfig& c) { return format_list(c.base_pattern); }}},
        {"model.circles",
         Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.model.circles = parse_circles(k, v); },
               [](const RunConfig& c) { return format_circles(c.model.circles); }}},
        {"model.mask_file", EITBIN_STRING(model.mask_file)},
        {"model.mask_values",
         Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.model.mask_values = parse_list(k, v); },
               [](const RunConfig& c) { return format_list(c.model.mask_values); }}},
        {"model.measurement_file", EITBIN_STRING(model.measurement_file)},
        {"model.sigma_c", EITBIN_DOUBLE(model.sigma_c)},
        {"model.sigma_h", EITBIN_DOUBLE(model.sigma_h)},
        {"noise_level", EITBIN_DOUBLE(noise_level)},
        {"seed", EITBIN_INT(seed, std::uint64_t)},
        {"collection.file", EITBIN_STRING(collection.file)},
        {"collection.data_file", EITBIN_STRING(collection.data_file)},
        {"collection.size", EITBIN_INT(collection.size, int)},
        {"collection.nc_max", EITBIN_INT(collection.nc_max, int)},
        {"collection.r_max_fraction", EITBIN_DOUBLE(collection.r_max_fraction)},
        {"collection.sigma_c", EITBIN_DOUBLE(collection.sigma_c)},
        {"collection.sigma_h", EITBIN_DOUBLE(collection.sigma_h)},
        {"optimizer.method", EITBIN_STRING(optimizer.method)},
        {"optimizer.tolerance", EITBIN_DOUBLE(optimizer.tolerance)},
        {"optimizer.max_cost_evals", EITBIN_INT(optimizer.max_cost_evals, long)},
        {"optimizer.coarse_max_cost_evals", EITBIN_INT(optimizer.coarse_max_cost_evals, long)},
        {"optimizer.delta_p", EITBIN_DOUBLE(optimizer.delta_p)},
        {"optimizer.delta_zeta", EITBIN_DOUBLE(optimizer.delta_zeta)},
        {"optimizer.n_s", EITBIN_INT(optimizer.n_s, int)},
        {"optimizer.n_max", EITBIN_INT(optimizer.n_max, int)},
        {"output_dir", EITBIN_STRING(output_dir)},
        {"threads", EITBIN_INT(threads, int)},
    };
    return table;
}

#undef EITBIN_DOUBLE
#undef EITBIN_INT
#undef EITBIN_STRING

}  // namespace

void validate_config(const RunConfig& c) {
    auto require = [](bool ok, const char* key, const std::string& msg) {
        if (!ok) throw ConfigError(key, msg);
    };
    require(c.mesh.radius > 0.0, "mesh.radius", "must be positive");
    require(c.mesh.target_elements >= 16, "mesh.target_elements", "must be at least 16");
    require(c.electrodes.count >= 2, "electrodes.count", "must be at least 2");
    require(c.electrodes.half_width > 0.0, "electrodes.half_width", "must be positive");
    require(c.electrodes.impedance > 0.0, "electrodes.impedance", "must be positive");
    require(static_cast<int>(c.base_pattern.size()) == c.electrodes.count, "excitation.base_pattern",
            "needs one voltage per electrode");
    double sum = 0.0, scale = 0.0;
    for (double u : c.base_pattern) {
        sum += u;
        scale = std::max(scale, std::abs(u));
    }
    require(std::abs(sum) <= 1e-12 * std::max(scale, 1.0), "excitation.base_pattern", "must sum to zero");

    const int sources = !c.model.circles.empty() + !c.model.mask_file.empty() + !c.model.measurement_file.empty();
    require(sources == 1, "model", "set exactly one of model.circles, model.mask_file, model.measurement_file");
    for (const auto& r : c.model.circles) {
        require(r.circle.r > 0.0, "model.circles", "radii must be positive");
        require(!r.value || *r.value > 0.0, "model.circles", "values must be positive");
    }
    for (double v : c.model.mask_values) require(v > 0.0, "model.mask_values", "values must be positive");
    require(c.model.sigma_h > 0.0, "model.sigma_h", "must be positive");
    require(c.model.sigma_c > c.model.sigma_h, "model.sigma_c", "must exceed model.sigma_h");
    require(c.noise_level >= 0.0, "noise_level", "must be non-negative");

    require(c.collection.file.empty() == c.collection.data_file.empty(), "collection.data_file",
            "collection.file and collection.data_file go together");
    require(c.collection.size >= 1, "collection.size", "must be positive");
    require(c.collection.nc_max >= 1, "collection.nc_max", "must be positive");
    require(c.collection.r_max_fraction > 0.0 && c.collection.r_max_fraction <= 1.0, "collection.r_max_fraction",
            "must lie in (0, 1]");
    require(c.collection.sigma_h > 0.0, "collection.sigma_h", "must be positive");
    require(c.collection.sigma_c > c.collection.sigma_h, "collection.sigma_c", "must exceed collection.sigma_h");

    require(c.optimizer.method == "projected-gradient" || c.optimizer.method == "coordinate-descent",
            "optimizer.method", "must be projected-gradient or coordinate-descent");
    require(c.optimizer.tolerance > 0.0, "optimizer.tolerance", "must be positive");
    require(c.optimizer.max_cost_evals >= 1, "optimizer.max_cost_evals", "must be positive");
    require(c.optimizer.coarse_max_cost_evals >= 1, "optimizer.coarse_max_cost_evals", "must be positive");
    require(c.optimizer.delta_p > 0.0, "optimizer.delta_p", "must be positive");
    require(c.optimizer.delta_zeta >= 0.0, "optimizer.delta_zeta", "must be non-negative");
    require(c.optimizer.n_s >= 1, "optimizer.n_s", "must be positive");
    require(c.optimizer.n_max >= 1, "optimizer.n_max", "must be positive");
    if (c.collection.file.empty()) {
        require(c.collection.size >= 10 * c.optimizer.n_s, "collection.size",
                "must be at least 10 * optimizer.n_s");
    }
    require(!c.output_dir.empty(), "output_dir", "must not be empty");
    require(c.threads >= 0, "threads", "must be non-negative");
}

RunConfig parse_config(std::istream& in) {
    std::map<std::string, const Field*> index;
    for (const auto& [k, f] : fields()) index[k] = &f;
    RunConfig config;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const auto it = index.find(key);
        if (it == index.end()) throw ConfigError(key, "unknown key");
        it->second->set(config, key, line.substr(eq + 1));
    }
    validate_config(config);
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path);
    return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& config) {
    for (const auto& [k, f] : fields()) out << k << " = " << f.get(config) << '\n';
}

std::string serialize_config(const RunConfig& config) {
    std::ostringstream out;
    write_config(out, config);
    return out.str();
}

}  // namespace eitbin
