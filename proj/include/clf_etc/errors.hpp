#pragma once

#include <stdexcept>
#include <string>

namespace clf_etc {

/// Argument outside the mathematical domain of an operation (s <= 0 for
/// Gamma, sigma outside (0,1), ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent or incomplete configuration (missing gamma', bad schema).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dimension mismatch between a vector and the system that owns it.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A standing assumption on the CLF/feedback pair failed on samples
/// (non-degeneracy, properness of V).
class AssumptionViolation : public std::runtime_error {
 public:
  AssumptionViolation(std::string assumption, const std::string& what)
      : std::runtime_error(what), assumption_(std::move(assumption)) {}

  const std::string& assumption() const noexcept { return assumption_; }

 private:
  std::string assumption_;
};

}  // namespace clf_etc
