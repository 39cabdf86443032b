#include "gazelab/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace gazelab::log {

namespace {

Level from_env() noexcept {
    const char* v = std::getenv("GAZELAB_LOG");
    if (!v) return Level::warn;
    const std::string s(v);
    if (s == "error") return Level::error;
    if (s == "info") return Level::info;
    if (s == "debug") return Level::debug;
    return Level::warn;
}

std::atomic<int>& current() {
    static std::atomic<int> level{static_cast<int>(from_env())};
    return level;
}

constexpr std::string_view kNames[] = {"error", "warn", "info", "debug"};

}  // namespace

Level threshold() noexcept { return static_cast<Level>(current().load()); }
void set_threshold(Level level) noexcept { current().store(static_cast<int>(level)); }
bool enabled(Level level) noexcept { return static_cast<int>(level) <= current().load(); }

void write(Level level, std::string_view message) {
    if (!enabled(level)) return;
    static std::mutex mu;
    const std::lock_guard lock(mu);
    std::cerr << "gazelab: " << kNames[static_cast<int>(level)] << ": " << message << '\n';
}

}  // namespace gazelab::log
