#pragma once

#include <stdexcept>
#include <string>

namespace evfleet {

/// Invalid scenario input: config files, network files, demand profiles.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model invariant was violated while the simulation was running.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reading or writing an output/input file failed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No path exists between two edges.
class NoRouteError : public ModelError {
 public:
  using ModelError::ModelError;
};

/// An event was scheduled before the current clock.
class PastSchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace evfleet
