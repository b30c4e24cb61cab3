#pragma once

#include <stdexcept>
#include <string>

namespace mats {

// Malformed input to an operation: wrong dimensions, out-of-range values.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input that is empty once normalized (no tokens, no samples).
class EmptyInputError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Invalid configuration: weights off the simplex, unknown keys, bad ranges.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced or consumed where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A projection collapsed the input to (numerically) the zero vector.
class DegenerateProjectionError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Reading or writing run artifacts failed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mats
