#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace scalesense {

enum class ErrorCode {
  InvalidArgument,
  // geometry
  BehindCamera,
  DegenerateLine,
  NoIntersection,
  Tangent,
  ParallelLines,
  FeatureOutsideBox,
  ZeroHeight,
  NonPositiveVariance,
  // priors
  MalformedPrior,
  UnknownClass,
  // inference
  InvalidBounds,
  DegenerateUpdate,
  // simulator
  InfeasiblePlacement,
  // evaluation
  ZeroRange,
  EmptyWindow,
  // io
  ParseError,
  NonMonotonicFrame,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers can count and skip per-observation failures without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Feed parse failure; `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason);

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

}  // namespace scalesense
