// Copyright 2026 The ddidd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ddidd {

enum class ErrorCode {
  MalformedLine,
  OutOfRange,
  BadAddress,
  EmptyName,
  IoError,
  MonotonicityViolation,
  EmptySample,
  EmptyWindow,
  RuleCapExceeded,
  UnknownSource,
  ExpiredState,
  NoBaseline,
  NotPrimed,
  ConfigError,
  TraceError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::BadAddress: return "BadAddress";
    case ErrorCode::EmptyName: return "EmptyName";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::RuleCapExceeded: return "RuleCapExceeded";
    case ErrorCode::UnknownSource: return "UnknownSource";
    case ErrorCode::ExpiredState: return "ExpiredState";
    case ErrorCode::NoBaseline: return "NoBaseline";
    case ErrorCode::NotPrimed: return "NotPrimed";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TraceError: return "TraceError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
/// `line()` is non-zero only for errors tied to a trace file line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::size_t line = 0)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::size_t line_;
};

}  // namespace ddidd
