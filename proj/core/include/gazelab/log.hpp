#pragma once

// Minimal stderr logger. Verbosity comes from GAZELAB_LOG
// (error, warn, info, debug; default warn).

#include <string_view>

namespace gazelab::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level threshold() noexcept;
void set_threshold(Level level) noexcept;
bool enabled(Level level) noexcept;
void write(Level level, std::string_view message);

inline void error(std::string_view m) { write(Level::error, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void debug(std::string_view m) { write(Level::debug, m); }

}  // namespace gazelab::log
