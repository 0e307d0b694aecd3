#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vokit {

enum class ErrorCode {
  NonPositiveDepth,
  InconsistentDepth,
  DegeneratePlane,
  TooManyLevels,
  OutOfBounds,
  SingularHessian,
  NonInvertibleIncrement,
  DegenerateConfiguration,
  InsufficientParallax,
  AmbiguousCheirality,
  DivergedBA,
  RankDeficientNormalEquations,
  NoCorrespondences,
  NoConsensus,
  SetCollapsed,
  EmptyView,
  FrameMismatch,
  InvalidArgument,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Exception type thrown by every vokit operation. The code identifies the
/// failure class so callers can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace vokit
