// SPDX-License-Identifier: Apache-2.0
#include "error.hpp"

namespace orient {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::VersionError: return "VersionError";
    case ErrorCode::DimensionError: return "DimensionError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::InsufficientReferences: return "InsufficientReferences";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyEval: return "EmptyEval";
  }
  return "Unknown";
}

}  // namespace orient
