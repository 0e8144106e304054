#include "evflow/error.hpp"

namespace evflow {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::DuplicateArm: return "DuplicateArm";
    case ErrorCode::SingleArmTrial: return "SingleArmTrial";
    case ErrorCode::DisconnectedNetwork: return "DisconnectedNetwork";
    case ErrorCode::NonpositiveVariance: return "NonpositiveVariance";
    case ErrorCode::ZeroOrFullEvents: return "ZeroOrFullEvents";
    case ErrorCode::UnknownTreatment: return "UnknownTreatment";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonrealizableTrial: return "NonrealizableTrial";
    case ErrorCode::ConservationViolation: return "ConservationViolation";
    case ErrorCode::IsolatedNode: return "IsolatedNode";
    case ErrorCode::AbsorbingRow: return "AbsorbingRow";
    case ErrorCode::SingularFundamentalMatrix: return "SingularFundamentalMatrix";
    case ErrorCode::WalkLimitExceeded: return "WalkLimitExceeded";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace evflow
