#pragma once

#include "eitbin/config.hpp"
#include "eitbin/geometry.hpp"
#include "eitbin/field.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace eitbin::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_io = 3,
    exit_solver = 4,
    exit_degenerate = 5,
};

struct GlobalOptions {
    std::string config_path;  ///< empty: built-in model #1 defaults
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    std::optional<int> threads;
};

/// Name of the environment variable read when --threads is absent.
inline constexpr const char* threads_env = "EITBIN_THREADS";

/// --threads, then $EITBIN_THREADS, then `threads` from the config, then the
/// hardware concurrency. Always >= 1.
int resolve_threads(std::optional<int> flag, int config_threads);

/// Loads the config (or the defaults) and applies --seed / --output.
RunConfig load_run_config(const GlobalOptions& options);

/// Runs `body`, mapping library exceptions to exit codes and printing the
/// message to `err`.
int guarded(std::ostream& err, const std::function<int()>& body);

int cmd_gen_samples(const GlobalOptions& options, std::ostream& out, std::ostream& err);
int cmd_reconstruct(const GlobalOptions& options, std::ostream& out, std::ostream& err);

struct KappaCommand {
    std::string family = "alpha";
    double gradient_scale = 1.0;
    std::uint64_t direction_index = 0;
};

/// Writes `<output>/kappa_<family>.csv`.
int cmd_kappa(const GlobalOptions& options, const KappaCommand& command, std::ostream& out, std::ostream& err);

struct RenderCommand {
    std::string field_path;
    std::string mesh_path;
    std::string image_path;
    int size = 256;
};

/// Plain PGM (P2) of the field sampled at pixel centres; pixels outside the
/// mesh are 0, inside ones map [min, max] linearly onto 1..255 (a uniform
/// field is all 255). The legend goes to `<image>.legend.txt`.
int cmd_render(const RenderCommand& command, std::ostream& out, std::ostream& err);

/// Rendering core of cmd_render.
void render_field(const Mesh& mesh, const ConductivityField& field, int size, std::ostream& image,
                  std::ostream& legend);

}  // namespace eitbin::cli
