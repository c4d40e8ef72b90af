#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace lqnash {

enum class log_level { error = 0, info = 1, debug = 2 };

/// Log level from the LQNASH_LOG environment variable ("error", "info",
/// "debug"); defaults to error.
inline log_level current_log_level() {
  static const log_level level = [] {
    const char* env = std::getenv("LQNASH_LOG");
    if (env == nullptr) return log_level::error;
    const std::string v(env);
    if (v == "debug") return log_level::debug;
    if (v == "info") return log_level::info;
    return log_level::error;
  }();
  return level;
}

inline void log(log_level level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(current_log_level())) {
    const char* tag = level == log_level::debug  ? "debug"
                      : level == log_level::info ? "info"
                                                 : "error";
    std::cerr << "[lqnash:" << tag << "] " << msg << "\n";
  }
}

inline void log_info(const std::string& msg) { log(log_level::info, msg); }
inline void log_debug(const std::string& msg) { log(log_level::debug, msg); }

}  // namespace lqnash
