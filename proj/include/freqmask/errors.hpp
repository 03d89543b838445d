#pragma once

#include <stdexcept>
#include <string>

namespace freqmask {

// Incompatible tensor shapes.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Axis or element index out of range.
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Bad scalar argument (non-positive extent, out-of-range label, ...).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Violated calling contract, e.g. backward() on a non-scalar node.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Invalid configuration value.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace freqmask
