#include "slowfast/errors.hpp"

namespace slowfast {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularOperator: return "SingularOperator";
    case ErrorCode::EpsilonOutOfRange: return "EpsilonOutOfRange";
    case ErrorCode::SingularA22: return "SingularA22";
    case ErrorCode::DeltaNotPositive: return "DeltaNotPositive";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NoStabilizingSolution: return "NoStabilizingSolution";
    case ErrorCode::SingularClosedLoop: return "SingularClosedLoop";
    case ErrorCode::MaxItersExceeded: return "MaxItersExceeded";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::ZeroDisplacement: return "ZeroDisplacement";
    case ErrorCode::NonDecaying: return "NonDecaying";
    case ErrorCode::NoiseFloor: return "NoiseFloor";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::AllPathsExploded: return "AllPathsExploded";
    case ErrorCode::InvalidProblem: return "InvalidProblem";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<double> time, std::optional<double> value)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      time_(time),
      value_(value) {}

}  // namespace slowfast
