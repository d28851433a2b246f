#pragma once

#include <stdexcept>
#include <string>

namespace crexlab {

/// Argument outside the domain of an operation (u outside [0,1], F̄(t) = 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An integral failed to converge at the requested tolerance, or is known to diverge.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sample too small for the requested estimator.
class SizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tuning parameter that would produce nonpositive weights.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed textual spec (distribution, estimator, config file).
class ParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace crexlab
