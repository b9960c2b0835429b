#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aadt {

/// Failure categories. Each maps onto one process exit code.
enum class ErrorCategory { Usage = 1, Data = 2, Numeric = 3 };

enum class ErrorCode {
  Usage,
  Io,
  InvalidArgument,
  InvalidHorizon,
  InvalidSplit,
  InvalidWindow,
  DegenerateNormalizer,
  NumericDomain,
  NoObservedData,
  InsufficientData,
  IncompleteMatrix,
  ShapeMismatch,
  EmptyLoss,
  ModelMismatch,
  MalformedModel,
  PartialYear,
  IncompleteActuals,
  InvalidActual,
  MalformedSeries,
  ZeroVolume,
};

/// Stable kebab-case name, used in machine-readable error lines.
std::string_view error_code_name(ErrorCode code) noexcept;
ErrorCategory error_category(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return error_category(code_); }

private:
  ErrorCode code_;
};

}  // namespace aadt
