#include "ccpd/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>

namespace ccpd::log {

namespace {

Level parse_env() {
    const char* raw = std::getenv("CCPD_LOG");
    if (raw == nullptr) return Level::Warn;
    const std::string v(raw);
    if (v == "error") return Level::Error;
    if (v == "warn") return Level::Warn;
    if (v == "info") return Level::Info;
    if (v == "debug") return Level::Debug;
    return Level::Warn;
}

std::atomic<int>& threshold_storage() {
    static std::atomic<int> value{static_cast<int>(parse_env())};
    return value;
}

const char* tag(Level level) {
    switch (level) {
        case Level::Error: return "error";
        case Level::Warn: return "warn";
        case Level::Info: return "info";
        case Level::Debug: return "debug";
    }
    return "?";
}

} // namespace

Level threshold() { return static_cast<Level>(threshold_storage().load()); }

void set_threshold(Level level) { threshold_storage().store(static_cast<int>(level)); }

void emit(Level level, const std::string& message) {
    if (static_cast<int>(level) > threshold_storage().load()) return;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    std::fprintf(stderr, "[ccpd %s] %s\n", tag(level), message.c_str());
}

} // namespace ccpd::log
