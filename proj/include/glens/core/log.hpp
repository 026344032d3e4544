/*
 * Copyright 2026 The Glens Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <atomic>
#include <iostream>
#include <string>

namespace glens {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3, kOff = 4 };

namespace detail {
inline std::atomic<int>& log_threshold() {
  static std::atomic<int> level{static_cast<int>(LogLevel::kWarning)};
  return level;
}
inline std::atomic<long>& warning_count() {
  static std::atomic<long> count{0};
  return count;
}
}  // namespace detail

inline void set_log_level(LogLevel level) { detail::log_threshold() = static_cast<int>(level); }
inline LogLevel log_level() { return static_cast<LogLevel>(detail::log_threshold().load()); }

// Number of warnings raised so far (including suppressed ones).
inline long warnings_logged() { return detail::warning_count().load(); }

inline void log(LogLevel level, const std::string& message) {
  if (level == LogLevel::kWarning) ++detail::warning_count();
  if (static_cast<int>(level) < detail::log_threshold()) return;
  static const char* const kTags[] = {"debug", "info", "warning", "error"};
  std::clog << "[glens " << kTags[static_cast<int>(level)] << "] " << message << '\n';
}

inline void log_info(const std::string& message) { log(LogLevel::kInfo, message); }
inline void log_warning(const std::string& message) { log(LogLevel::kWarning, message); }

}  // namespace glens
