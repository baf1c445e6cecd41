#pragma once

#include <stdexcept>
#include <string>

namespace forcerec {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Mismatched ambient dimensions between operands.
class DimensionError : public Error {
public:
  using Error::Error;
};

// Invalid parameter values (out-of-range tolerances, bad grids, c = 0, ...).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

// Numerical breakdown: divergent trajectories, ill-conditioned inversions,
// eigensolver non-convergence. `condition` carries the offending condition
// number when one is known, 0 otherwise.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what, double condition = 0.0)
      : Error(what), condition_(condition) {}
  double condition() const { return condition_; }

private:
  double condition_;
};

// A required frame condition does not hold. Carries the measured bounds so
// callers can report how far the system is from a frame.
class FrameConditionError : public Error {
public:
  FrameConditionError(const std::string& what, double lower, double upper)
      : Error(what), lower_(lower), upper_(upper) {}
  double lower() const { return lower_; }
  double upper() const { return upper_; }

private:
  double lower_;
  double upper_;
};

// Data does not satisfy the preconditions of the requested operation
// (non-convergent rows, finite norms requested on unbounded data, ...).
class DataError : public Error {
public:
  using Error::Error;
};

// Malformed configuration input (CLI layer).
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace forcerec
