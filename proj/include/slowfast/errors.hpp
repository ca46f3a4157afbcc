#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace slowfast {

enum class ErrorCode {
  DimensionMismatch,
  SingularOperator,
  EpsilonOutOfRange,
  SingularA22,
  DeltaNotPositive,
  StepSizeUnderflow,
  NoStabilizingSolution,
  SingularClosedLoop,
  MaxItersExceeded,
  Divergence,
  ZeroDisplacement,
  NonDecaying,
  NoiseFloor,
  StepTooLarge,
  AllPathsExploded,
  InvalidProblem,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for every solver failure. `code` drives the CLI
/// exit status; `time` carries the breach time for DeltaNotPositive and the
/// stall time for StepSizeUnderflow, `value` carries an auxiliary number
/// (last gap, offending epsilon, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<double> time = std::nullopt,
        std::optional<double> value = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<double> time() const noexcept { return time_; }
  std::optional<double> value() const noexcept { return value_; }

 private:
  ErrorCode code_;
  std::optional<double> time_;
  std::optional<double> value_;
};

}  // namespace slowfast
