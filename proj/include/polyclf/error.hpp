#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polyclf {

enum class ErrorCode {
  InvalidArgument,
  NotPointed,
  Unbounded,
  Infeasible,
  NotSimple,
  PerturbationFailed,
  AssumptionViolated,
  DegenerateHull,
  ModeMismatch,
  SolverFailure,
  NotStabilizable,
  TreeTooLarge,
  OutOfDomain,
  DegenerateRegion,
  StartOutOfDomain,
  Io,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; the code lets callers
// (the CLI in particular) map failures onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace polyclf
