#pragma once

#include <stdexcept>
#include <string>

namespace mspm {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input data (CSV rows, ranges, calendars).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Tensor or layer shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf, divergence, a non-positive log argument, or a solver that did not converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The portfolio value recursion was violated.
class AccountingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was invoked before the stages it depends on.
class PrerequisiteError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace mspm
