#pragma once

#include <stdexcept>
#include <string>

namespace edgeadapt {

// Invalid or inconsistent configuration objects: empty dimensions, unknown
// model versions, dimension drift between components.
struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid argument values at operation boundaries (negative noise level,
// non-positive bandwidth, too-short series, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// File or schema problems when reading traces, configs, or checkpoints.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A metric has no defined value for the given inputs.
struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced NaN losses or logits.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace edgeadapt
