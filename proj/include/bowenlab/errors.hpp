#ifndef BOWENLAB_ERRORS_HPP
#define BOWENLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bowenlab {

// Base class for everything thrown by the library. The CLI maps subclasses
// onto exit codes: configuration/feasibility failures -> 2, numerical
// failures -> 3.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- numerical failures -----------------------------------------------------

class NoConvergence : public Error {
public:
  NoConvergence(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

class DerivativeVanished : public Error {
public:
  using Error::Error;
};

class NonFiniteValue : public Error {
public:
  using Error::Error;
};

class PoleHit : public Error {
public:
  using Error::Error;
};

class WordBudgetExceeded : public Error {
public:
  WordBudgetExceeded(const std::string& what, std::size_t words)
      : Error(what), words(words) {}
  std::size_t words;
};

class NoSignChange : public Error {
public:
  using Error::Error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class InvalidAddress : public Error {
public:
  using Error::Error;
};

class InsufficientData : public Error {
public:
  using Error::Error;
};

// --- configuration / feasibility failures -----------------------------------

class Unsupported : public Error {
public:
  using Error::Error;
};

class BranchDomainInvalid : public Error {
public:
  using Error::Error;
};

class ConfigInfeasible : public Error {
public:
  using Error::Error;
};

// A schedule search ran out of poles (or stagnated) before reaching its
// target sum. Carries the partial sum it did reach.
class ScheduleInfeasible : public Error {
public:
  ScheduleInfeasible(const std::string& what, double achieved_sum,
                     std::size_t poles_consumed)
      : Error(what), achieved_sum(achieved_sum), poles_consumed(poles_consumed) {}
  double achieved_sum;
  std::size_t poles_consumed;
};

class NotSupercritical : public Error {
public:
  using Error::Error;
};

inline bool is_config_error(const Error& e) {
  return dynamic_cast<const Unsupported*>(&e) != nullptr ||
         dynamic_cast<const BranchDomainInvalid*>(&e) != nullptr ||
         dynamic_cast<const ConfigInfeasible*>(&e) != nullptr ||
         dynamic_cast<const ScheduleInfeasible*>(&e) != nullptr ||
         dynamic_cast<const NotSupercritical*>(&e) != nullptr ||
         dynamic_cast<const DomainError*>(&e) != nullptr;
}

}  // namespace bowenlab

#endif  // BOWENLAB_ERRORS_HPP
