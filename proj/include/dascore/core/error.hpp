// Copyright 2026 The dascore Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace dascore {

enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kTransport,
  kProtocol,
  kIntegrity,
  kIo,
  kUndefinedCorrelation,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kTransport: return "transport_error";
    case ErrorCode::kProtocol: return "protocol_error";
    case ErrorCode::kIntegrity: return "integrity_error";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kUndefinedCorrelation: return "undefined_correlation";
  }
  return "unknown";
}

/// Base of every error raised by the library. The code lets callers (the CLI
/// exit-code mapping, the HTTP status mapping) branch without RTTI.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error(ErrorCode::kInvalidArgument, message) {}
};

/// Raised when backend text cannot be turned into a domain value. `span`
/// holds the offending excerpt of the input.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::string span)
      : Error(ErrorCode::kParse, message + (span.empty() ? "" : ": `" + span + "`")),
        span_(std::move(span)) {}

  const std::string& span() const noexcept { return span_; }

 private:
  std::string span_;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message)
      : Error(ErrorCode::kTransport, message) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message, int status = 0)
      : Error(ErrorCode::kProtocol, message), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& message)
      : Error(ErrorCode::kIntegrity, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorCode::kIo, message) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace dascore
