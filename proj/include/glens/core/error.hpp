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

#include <stdexcept>
#include <string>

namespace glens {

enum class ErrorKind {
  kInvalidArgument,
  kShapeMismatch,
  kOutOfRange,
  kIo,
  kMalformedHeader,
  kTruncatedPayload,
  kVersionMismatch,
  kConfig,
  kMissingArtifact,
  kDivergence,
  kUnsatisfiable,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kShapeMismatch: return "shape mismatch";
    case ErrorKind::kOutOfRange: return "out of range";
    case ErrorKind::kIo: return "i/o failure";
    case ErrorKind::kMalformedHeader: return "malformed header";
    case ErrorKind::kTruncatedPayload: return "truncated payload";
    case ErrorKind::kVersionMismatch: return "version mismatch";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kMissingArtifact: return "missing artifact";
    case ErrorKind::kDivergence: return "numerical divergence";
    case ErrorKind::kUnsatisfiable: return "unsatisfiable constraint";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it onto an exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace glens
