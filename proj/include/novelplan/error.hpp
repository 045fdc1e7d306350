#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace novelplan {

// Caller passed data of the wrong shape or outside a documented domain.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// An operation was invoked without its precondition being established.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Training hit a non-finite loss or gradient.
struct TrainingError : std::runtime_error {
  TrainingError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step(step) {}
  std::size_t step;
};

// Non-finite value encountered during a numeric check.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Persisted artifact could not be read back.
struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration key, value, or missing artifact.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace novelplan
