#include "aadtcast/error.hpp"

namespace aadt {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Usage: return "usage";
    case ErrorCode::Io: return "io";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::InvalidHorizon: return "invalid-horizon";
    case ErrorCode::InvalidSplit: return "invalid-split";
    case ErrorCode::InvalidWindow: return "invalid-window";
    case ErrorCode::DegenerateNormalizer: return "degenerate-normalizer";
    case ErrorCode::NumericDomain: return "numeric-domain";
    case ErrorCode::NoObservedData: return "no-observed-data";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::IncompleteMatrix: return "incomplete-matrix";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::EmptyLoss: return "empty-loss";
    case ErrorCode::ModelMismatch: return "model-mismatch";
    case ErrorCode::MalformedModel: return "malformed-model";
    case ErrorCode::PartialYear: return "partial-year";
    case ErrorCode::IncompleteActuals: return "incomplete-actuals";
    case ErrorCode::InvalidActual: return "invalid-actual";
    case ErrorCode::MalformedSeries: return "malformed-series";
    case ErrorCode::ZeroVolume: return "zero-volume";
  }
  return "unknown";
}

ErrorCategory error_category(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Usage:
    case ErrorCode::InvalidArgument:
      return ErrorCategory::Usage;
    case ErrorCode::DegenerateNormalizer:
    case ErrorCode::NumericDomain:
    case ErrorCode::EmptyLoss:
      return ErrorCategory::Numeric;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace aadt
