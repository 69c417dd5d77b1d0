// SPDX-License-Identifier: Apache-2.0

#include "igpose/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace igpose::log {

namespace {
std::atomic<int> g_level{static_cast<int>(Level::warn)};
std::mutex g_mu;

void emit(Level l, const char* tag, const std::string& msg) {
  if (static_cast<int>(l) > g_level.load())
    return;
  std::lock_guard<std::mutex> lock(g_mu);
  std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}
} // namespace

void set_level(Level l) { g_level = static_cast<int>(l); }
Level level() { return static_cast<Level>(g_level.load()); }
void warn(const std::string& msg) { emit(Level::warn, "warn", msg); }
void info(const std::string& msg) { emit(Level::info, "info", msg); }
void debug(const std::string& msg) { emit(Level::debug, "debug", msg); }

} // namespace igpose::log
