#pragma once

#include <stdexcept>
#include <string>

namespace ibflow {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: bad geometry parameters, malformed configs, violated
/// preconditions that the caller controls.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed: singular systems, Krylov non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Surface files that cannot be read or fail validation.
class SurfaceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ibflow
