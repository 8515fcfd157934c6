#include "medctx/core/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace medctx::log {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

void stderr_sink(Level level, std::string_view message) {
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::cerr << "[medctx " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

Sink& current_sink() {
  static Sink sink = stderr_sink;
  return sink;
}

std::atomic<int> g_min_level{static_cast<int>(Level::info)};

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  Sink old = std::move(current_sink());
  current_sink() = sink ? std::move(sink) : Sink(stderr_sink);
  return old;
}

void set_min_level(Level level) { g_min_level = static_cast<int>(level); }

void write(Level level, std::string_view message) {
  if (static_cast<int>(level) < g_min_level) return;
  std::lock_guard lock(sink_mutex());
  current_sink()(level, message);
}

Capture::Capture() {
  previous_ = set_sink([this](Level level, std::string_view msg) {
    messages_.emplace_back(msg);
    if (level == Level::warn) warnings_.emplace_back(msg);
  });
}

Capture::~Capture() { set_sink(std::move(previous_)); }

}  // namespace medctx::log
