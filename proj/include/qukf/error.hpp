#pragma once

#include <stdexcept>
#include <string>

namespace qukf {

enum class ErrorCode {
  kNotSkewSymmetric,
  kNotRotation,
  kDegenerateSpectrum,
  kSingularAllocation,
  kDegenerateScaling,
  kFactorizationFailure,
  kSingularInnovation,
  kDivergenceDetected,
  kParseError,
  kValidationError,
  kIoError,
  kInvalidArgument,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. Every failure surfaced by this project carries a
/// code so the CLI can map it to an exit status.
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
    case ErrorCode::kNotSkewSymmetric: return "NotSkewSymmetric";
    case ErrorCode::kNotRotation: return "NotRotation";
    case ErrorCode::kDegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::kSingularAllocation: return "SingularAllocation";
    case ErrorCode::kDegenerateScaling: return "DegenerateScaling";
    case ErrorCode::kFactorizationFailure: return "FactorizationFailure";
    case ErrorCode::kSingularInnovation: return "SingularInnovation";
    case ErrorCode::kDivergenceDetected: return "DivergenceDetected";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace qukf
