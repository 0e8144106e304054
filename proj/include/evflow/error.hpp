#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evflow {

enum class ErrorCode {
  Parse,
  MissingColumn,
  DuplicateArm,
  SingleArmTrial,
  DisconnectedNetwork,
  NonpositiveVariance,
  ZeroOrFullEvents,
  UnknownTreatment,
  SingularCovariance,
  RankDeficient,
  NonrealizableTrial,
  ConservationViolation,
  IsolatedNode,
  AbsorbingRow,
  SingularFundamentalMatrix,
  WalkLimitExceeded,
  DimensionMismatch,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. The code is stable and is what the
/// CLI reports; the message carries the offending labels.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace evflow
