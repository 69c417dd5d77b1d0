// SPDX-License-Identifier: Apache-2.0
//
// Minimal leveled logging to stderr.

#ifndef IGPOSE_LOG_HPP_
#define IGPOSE_LOG_HPP_

#include <string>

namespace igpose::log {

enum class Level { quiet = 0, warn = 1, info = 2, debug = 3 };

void set_level(Level l);
Level level();
void warn(const std::string& msg);
void info(const std::string& msg);
void debug(const std::string& msg);

} // namespace igpose::log

#endif
