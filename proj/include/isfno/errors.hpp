#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isfno {

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

/// A spectral cutoff does not fit the grid (extent < 2 * kappa_max).
class CutoffTooLargeError : public ShapeError {
public:
  using ShapeError::ShapeError;
};

/// A precondition on arguments was violated.
class ContractError : public Error {
public:
  using Error::Error;
};

/// A tensor handle is not registered on the tape it is used with.
class MissingNodeError : public Error {
public:
  using Error::Error;
};

class UnsupportedError : public Error {
public:
  using Error::Error;
};

class SingularityError : public Error {
public:
  using Error::Error;
};

class DegenerateError : public Error {
public:
  using Error::Error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class NumericalError : public Error {
public:
  using Error::Error;
};

/// Non-finite values appeared. `time()` is the simulation time (solvers) or
/// NaN when the failure is not tied to a time.
class DivergenceError : public NumericalError {
public:
  DivergenceError(const std::string &what, double time)
      : NumericalError(what), time_(time) {}
  double time() const noexcept { return time_; }

private:
  double time_;
};

/// The substep controller hit its cap or the configuration is known to be
/// under-resolved.
class StiffnessError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

} // namespace isfno
