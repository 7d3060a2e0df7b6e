#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace eitbin {

using Rng = std::mt19937_64;

/// Derives an independent generator for a named purpose ("collection",
/// "noise", "directions", ...) from a single run seed.
Rng substream(std::uint64_t seed, std::string_view name);

/// Same as above with an extra integer index, e.g. one stream per sample.
Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index);

}  // namespace eitbin
