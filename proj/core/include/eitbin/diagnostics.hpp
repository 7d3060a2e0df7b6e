#pragma once

#include "eitbin/config.hpp"
#include "eitbin/grad.hpp"

#include <cstdint>
#include <string>

namespace eitbin {

enum class KappaFamily { alpha, geometry, zeta };

/// "alpha", "P" (or "geometry"), "zeta"; throws DomainError otherwise.
KappaFamily parse_kappa_family(const std::string& name);
std::string kappa_family_name(KappaFamily family);

struct KappaOptions {
    /// Multiplies the supplied gradient; the plateau then sits at 1 / scale.
    double gradient_scale = 1.0;
    /// Direction substream index, so several directions can share a seed.
    std::uint64_t direction_index = 0;
    int threads = 1;
};

struct KappaRun {
    KappaReport report;
    std::vector<double> gradient;
    std::vector<double> direction;
    double base_cost = 0.0;
};

/// Builds the Step-1 state of `config` (collection, ranking, blend) and runs
/// the kappa test for one control family over 10^0 .. 10^-12:
///  - alpha: zero-sum random direction, unit max-norm;
///  - geometry: random direction over all basis parameters with non-negative
///    radius components, unit max-norm, gradient by forward differences with
///    optimizer.delta_p;
///  - zeta: coarse state derived from the Step-1 blend, direction over the
///    value components only (the partition stays fixed).
/// Trial points that leave the positive cone yield NaN entries.
KappaRun run_kappa(const RunConfig& config, KappaFamily family, const KappaOptions& options = {});

}  // namespace eitbin
