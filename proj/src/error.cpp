#include "scalesense/error.hpp"

namespace scalesense {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::DegenerateLine: return "DegenerateLine";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::Tangent: return "Tangent";
    case ErrorCode::ParallelLines: return "ParallelLines";
    case ErrorCode::FeatureOutsideBox: return "FeatureOutsideBox";
    case ErrorCode::ZeroHeight: return "ZeroHeight";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::MalformedPrior: return "MalformedPrior";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::InvalidBounds: return "InvalidBounds";
    case ErrorCode::DegenerateUpdate: return "DegenerateUpdate";
    case ErrorCode::InfeasiblePlacement: return "InfeasiblePlacement";
    case ErrorCode::ZeroRange: return "ZeroRange";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonMonotonicFrame: return "NonMonotonicFrame";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

ParseError::ParseError(std::size_t line, const std::string& reason)
    : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + reason),
      line_(line),
      reason_(reason) {}

}  // namespace scalesense
