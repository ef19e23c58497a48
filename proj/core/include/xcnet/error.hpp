// Copyright 2026 The xcnet Authors. All Rights Reserved.
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

#include <stdexcept>
#include <string>
#include <string_view>

namespace xcnet {

enum class ErrorCode {
  kShapeMismatch,
  kAxisOutOfRange,
  kEmptyReduction,
  kDivideByZero,
  kGeometryInvalid,
  kNonScalarLoss,
  kDegenerateVector,
  kLabelOutOfRange,
  kBadMagic,
  kTruncatedFile,
  kCountMismatch,
  kConfigFingerprintMismatch,
  kParseError,
  kUnknownFamily,
  kSeverityOutOfRange,
  kEmptyDataset,
  kConfigError,
  kIoError,
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Exception type thrown by every xcnet module. The code identifies the
/// failure class; what() carries a human-readable diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kAxisOutOfRange: return "AxisOutOfRange";
    case ErrorCode::kEmptyReduction: return "EmptyReduction";
    case ErrorCode::kDivideByZero: return "DivideByZero";
    case ErrorCode::kGeometryInvalid: return "GeometryInvalid";
    case ErrorCode::kNonScalarLoss: return "NonScalarLoss";
    case ErrorCode::kDegenerateVector: return "DegenerateVector";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kCountMismatch: return "CountMismatch";
    case ErrorCode::kConfigFingerprintMismatch: return "ConfigFingerprintMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnknownFamily: return "UnknownFamily";
    case ErrorCode::kSeverityOutOfRange: return "SeverityOutOfRange";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace xcnet
