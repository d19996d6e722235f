// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace orient {

enum class ErrorCode {
  InvalidArgument,
  DegenerateInput,
  InvalidK,
  EmptyImage,
  IoError,
  FormatError,
  VersionError,
  DimensionError,
  ShapeMismatch,
  ConfigMismatch,
  InsufficientReferences,
  NonFiniteLoss,
  EmptyEval,
};

const char* error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the core library carries one of the codes above so
/// the C boundary can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace orient
