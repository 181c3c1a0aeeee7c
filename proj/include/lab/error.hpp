#pragma once

#include <stdexcept>
#include <string>

namespace lab {

enum class ErrorCode {
  PointOutsideChart,
  DerivativeUnavailable,
  ChartExit,
  StepSizeUnderflow,
  SeparationTooLarge,
  GridMismatch,
  ConjugatePointOnSegment,
  NoConvergence,
  BlowUp,
  WindowTooShort,
  SingularY,
  SingularInput,
  NotNegativelyCurved,
  InvalidArgument,
  ParseError,
  ValidationError,
  IoError,
};

const char* to_string(ErrorCode code);

// All failures raised by the lab carry a machine-readable code.
class LabError : public std::runtime_error {
 public:
  LabError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lab
