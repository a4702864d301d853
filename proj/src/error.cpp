#include "polyclf/error.hpp"

namespace polyclf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotPointed: return "NotPointed";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NotSimple: return "NotSimple";
    case ErrorCode::PerturbationFailed: return "PerturbationFailed";
    case ErrorCode::AssumptionViolated: return "AssumptionViolated";
    case ErrorCode::DegenerateHull: return "DegenerateHull";
    case ErrorCode::ModeMismatch: return "ModeMismatch";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::NotStabilizable: return "NotStabilizable";
    case ErrorCode::TreeTooLarge: return "TreeTooLarge";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::DegenerateRegion: return "DegenerateRegion";
    case ErrorCode::StartOutOfDomain: return "StartOutOfDomain";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace polyclf
