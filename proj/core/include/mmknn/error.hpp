// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmknn {

/// Categories of failures reported by the library. The CLI maps every
/// category to exit code 1; usage errors are handled by the argument parser.
enum class ErrorKind {
  kInvalidHyperparameter,
  kInvalidInput,
  kLabel,
  kDimension,
  kDegenerateVector,
  kEmptyRepository,
  kIncompleteInput,
  kSampling,
  kTrainingDivergence,
  kUnsupportedArchitecture,
  kIncompatibleModels,
  kCoverage,
  kConfig,
  kComparison,
  kParse,
  kSchema,
  kAlignment,
  kFormat,
  kEmptyReport,
  kIo,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidHyperparameter: return "invalid-hyperparameter";
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kLabel: return "label-error";
    case ErrorKind::kDimension: return "dimension-error";
    case ErrorKind::kDegenerateVector: return "degenerate-vector";
    case ErrorKind::kEmptyRepository: return "empty-repository";
    case ErrorKind::kIncompleteInput: return "incomplete-input";
    case ErrorKind::kSampling: return "sampling-error";
    case ErrorKind::kTrainingDivergence: return "training-divergence";
    case ErrorKind::kUnsupportedArchitecture: return "unsupported-architecture";
    case ErrorKind::kIncompatibleModels: return "incompatible-models";
    case ErrorKind::kCoverage: return "coverage-error";
    case ErrorKind::kConfig: return "config-error";
    case ErrorKind::kComparison: return "comparison-error";
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kSchema: return "schema-error";
    case ErrorKind::kAlignment: return "alignment-error";
    case ErrorKind::kFormat: return "format-error";
    case ErrorKind::kEmptyReport: return "empty-report";
    case ErrorKind::kIo: return "io-error";
  }
  return "unknown-error";
}

}  // namespace mmknn
