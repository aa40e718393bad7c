#pragma once

#include <iostream>
#include <string_view>

namespace hmtl::log {

enum class Level { Debug, Info, Warning, Error, Off };

inline Level& threshold() {
  static Level level = Level::Info;
  return level;
}

inline void write(Level level, std::string_view tag, std::string_view message) {
  if (level < threshold()) return;
  std::clog << '[' << tag << "] " << message << '\n';
}

inline void debug(std::string_view m) { write(Level::Debug, "debug", m); }
inline void info(std::string_view m) { write(Level::Info, "info", m); }
inline void warn(std::string_view m) { write(Level::Warning, "warning", m); }

}  // namespace hmtl::log
