#include "lab/error.hpp"

namespace lab {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PointOutsideChart: return "PointOutsideChart";
    case ErrorCode::DerivativeUnavailable: return "DerivativeUnavailable";
    case ErrorCode::ChartExit: return "ChartExit";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::SeparationTooLarge: return "SeparationTooLarge";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::ConjugatePointOnSegment: return "ConjugatePointOnSegment";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::SingularY: return "SingularY";
    case ErrorCode::SingularInput: return "SingularInput";
    case ErrorCode::NotNegativelyCurved: return "NotNegativelyCurved";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace lab
