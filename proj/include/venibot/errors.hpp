#pragma once

#include <stdexcept>
#include <string>

namespace venibot {

/// Invalid argument or parameter value (non-positive sigma, empty scale list, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or unknown configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or missing input data: unreadable image, empty dataset, missing checkpoint.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

/// Shape or wiring problem inside a model graph; the message names the node.
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation called in the wrong lifecycle state (backward before forward, ...).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateOrientationError : public FitError {
 public:
  using FitError::FitError;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Planned pose violates a gantry axis limit.
class WorkspaceError : public std::runtime_error {
 public:
  WorkspaceError(std::string axis, const std::string& what)
      : std::runtime_error(what), axis_(std::move(axis)) {}
  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

}  // namespace venibot
