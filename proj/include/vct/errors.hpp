#pragma once

#include <stdexcept>
#include <string>

namespace vct {

/// Base class of every exception thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (bad table, inconsistent config, malformed manifest).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Stored artifact is missing, corrupted, or of an unsupported schema version.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A rejection sampler ran out of attempts.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during integration or a steady-state solve.
class SimulationError : public Error {
 public:
  using Error::Error;
};

/// Two accumulators or reports were built on different grids.
class GridMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace vct
