#pragma once

#include <stdexcept>
#include <string>

namespace effbound {

enum class ErrorCode {
  InvalidArgument,
  PropensityOutOfRange,
  DivisionByZeroPropensity,
  SolverDiverged,
  UnboundedDual,
  RuleScenarioMismatch,
  EmptyArm,
  EmptyCell,
  DegenerateReps,
  InfoExceedsTarget,
  ParseError,
  ValidationError,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a code so the CLI can map it
// onto an exit-status class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PropensityOutOfRange: return "PropensityOutOfRange";
    case ErrorCode::DivisionByZeroPropensity: return "DivisionByZeroPropensity";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::UnboundedDual: return "UnboundedDual";
    case ErrorCode::RuleScenarioMismatch: return "RuleScenarioMismatch";
    case ErrorCode::EmptyArm: return "EmptyArm";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::DegenerateReps: return "DegenerateReps";
    case ErrorCode::InfoExceedsTarget: return "InfoExceedsTarget";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

}  // namespace effbound
