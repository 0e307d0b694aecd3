#include "vokit/error.hpp"

namespace vokit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::InconsistentDepth: return "InconsistentDepth";
    case ErrorCode::DegeneratePlane: return "DegeneratePlane";
    case ErrorCode::TooManyLevels: return "TooManyLevels";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::NonInvertibleIncrement: return "NonInvertibleIncrement";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::InsufficientParallax: return "InsufficientParallax";
    case ErrorCode::AmbiguousCheirality: return "AmbiguousCheirality";
    case ErrorCode::DivergedBA: return "DivergedBA";
    case ErrorCode::RankDeficientNormalEquations: return "RankDeficientNormalEquations";
    case ErrorCode::NoCorrespondences: return "NoCorrespondences";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::SetCollapsed: return "SetCollapsed";
    case ErrorCode::EmptyView: return "EmptyView";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace vokit
