#pragma once

#include <stdexcept>
#include <string>

namespace warpconcave {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what, double bound = 0.0)
      : std::domain_error(what), bound_(bound) {}

  /// Boundary value of the violated domain (e.g. the q-exponential floor).
  double bound() const noexcept { return bound_; }

 private:
  double bound_;
};

/// Caller broke a documented precondition (bad config, missing parameter).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative solver did not reach its tolerance.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Root bracket could not be established for a shooting map.
class BracketFailure : public SolverFailure {
 public:
  using SolverFailure::SolverFailure;
};

/// Time step too large for the explicit nonlinear sub-step; halve and retry.
class StiffnessError : public SolverFailure {
 public:
  StiffnessError(const std::string& what, double time)
      : SolverFailure(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Requested configuration lies outside what the library supports.
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace warpconcave
