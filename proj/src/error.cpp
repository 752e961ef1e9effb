#include "cylstable/error.hpp"

namespace cylstable {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::QuadratureNonConvergence: return "QuadratureNonConvergence";
    case ErrorCode::SingularArguments: return "SingularArguments";
    case ErrorCode::UnknownDomain: return "UnknownDomain";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
    case ErrorCode::PointOutsideDomain: return "PointOutsideDomain";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::CombinatorialBudget: return "CombinatorialBudget";
    case ErrorCode::SamplingExhausted: return "SamplingExhausted";
    case ErrorCode::StartOutsideDomain: return "StartOutsideDomain";
    case ErrorCode::TruncationBudgetExceeded: return "TruncationBudgetExceeded";
    case ErrorCode::PointBelowHyperplane: return "PointBelowHyperplane";
    case ErrorCode::ZeroSurvivors: return "ZeroSurvivors";
    case ErrorCode::DecayNotResolved: return "DecayNotResolved";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace cylstable
