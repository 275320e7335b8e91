#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fibergap {

enum class ErrorCode {
  kBoundaryPoint,
  kOutOfDomain,
  kSingularPreimage,
  kBadRadius,
  kBadExponent,
  kInsufficientIterate,
  kCylinderBlowup,
  kNotDecaying,
  kMassMismatch,
  kRangeViolation,
  kBadDensity,
  kAtomBudgetExceeded,
  kNotConverged,
  kBadInput,
  kPrecondition,
  kNotDiffeomorphism,
  kChecklistFailure,
  kGridMismatch,
  kInsufficientData,
  kEmptyTable,
  kConfigError,
  kExperimentError,
  kIoError,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBoundaryPoint: return "BoundaryPoint";
    case ErrorCode::kOutOfDomain: return "OutOfDomain";
    case ErrorCode::kSingularPreimage: return "SingularPreimage";
    case ErrorCode::kBadRadius: return "BadRadius";
    case ErrorCode::kBadExponent: return "BadExponent";
    case ErrorCode::kInsufficientIterate: return "InsufficientIterate";
    case ErrorCode::kCylinderBlowup: return "CylinderBlowup";
    case ErrorCode::kNotDecaying: return "NotDecaying";
    case ErrorCode::kMassMismatch: return "MassMismatch";
    case ErrorCode::kRangeViolation: return "RangeViolation";
    case ErrorCode::kBadDensity: return "BadDensity";
    case ErrorCode::kAtomBudgetExceeded: return "AtomBudgetExceeded";
    case ErrorCode::kNotConverged: return "NotConverged";
    case ErrorCode::kBadInput: return "BadInput";
    case ErrorCode::kPrecondition: return "PreconditionFailed";
    case ErrorCode::kNotDiffeomorphism: return "NotDiffeomorphism";
    case ErrorCode::kChecklistFailure: return "ChecklistFailure";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kEmptyTable: return "EmptyTable";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kExperimentError: return "ExperimentError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace fibergap
