#pragma once

#include <string_view>

namespace voices::log
{

enum class Level
{
  debug,
  info,
  warning,
  error,
  off
};

void set_level(Level level);
Level level();

void write(Level level, std::string_view message);
inline void info(std::string_view message) { write(Level::info, message); }
inline void warn(std::string_view message) { write(Level::warning, message); }

}  // namespace voices::log
