#pragma once

#include <stdexcept>
#include <string>

namespace qsdlab {

// Base of every error the toolkit raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments, malformed configs or chains, broken preconditions.
// The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Negative rates, probabilities outside [0,1] and similar.
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// API misuse: mismatched partitions, burn-in past run length, ...
class UsageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A declared rate bound or density envelope was exceeded during simulation.
class BoundViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Statistical degeneracy: no survivors, empty measures, acceptance too low.
// The CLI maps these to exit code 3.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Iterative method failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Survival mass below representable range during exact propagation.
class UnderflowError : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

}  // namespace qsdlab
