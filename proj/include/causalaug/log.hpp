#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

#include <json.hpp>

namespace causalaug {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline std::atomic<int>& log_level_ref() {
  static std::atomic<int> level{static_cast<int>(LogLevel::info)};
  return level;
}

inline void set_log_level(LogLevel level) { log_level_ref() = static_cast<int>(level); }

inline LogLevel log_level_from_string(std::string_view s) {
  if (s == "debug") return LogLevel::debug;
  if (s == "info") return LogLevel::info;
  if (s == "warn") return LogLevel::warn;
  if (s == "error") return LogLevel::error;
  if (s == "off") return LogLevel::off;
  return LogLevel::info;
}

// One JSON record per line on stderr; data streams stay on stdout/files.
inline void log_line(LogLevel level, std::string_view msg, nlohmann::json fields = nlohmann::json::object()) {
  if (static_cast<int>(level) < log_level_ref()) return;
  static std::mutex mu;
  static const char* names[] = {"debug", "info", "warn", "error"};
  fields["level"] = names[static_cast<int>(level)];
  fields["msg"] = std::string(msg);
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << fields.dump() << "\n";
}

inline void log_info(std::string_view msg, nlohmann::json fields = nlohmann::json::object()) {
  log_line(LogLevel::info, msg, std::move(fields));
}

inline void log_warn(std::string_view msg, nlohmann::json fields = nlohmann::json::object()) {
  log_line(LogLevel::warn, msg, std::move(fields));
}

inline void log_error(std::string_view msg, nlohmann::json fields = nlohmann::json::object()) {
  log_line(LogLevel::error, msg, std::move(fields));
}

}  // namespace causalaug
