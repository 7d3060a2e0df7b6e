#pragma once

#include <string_view>

namespace eitbin::log {

enum class Level { quiet = 0, warn = 1, info = 2 };

void set_level(Level level);
Level level();

// Diagnostics go to stderr; stdout is reserved for command summaries.
void warn(std::string_view message);
void info(std::string_view message);

}  // namespace eitbin::log
