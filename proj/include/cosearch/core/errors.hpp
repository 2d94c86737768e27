#pragma once

#include <stdexcept>
#include <string>

namespace cosearch {

// Invalid scalar parameter (band edges, orders, temperatures, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor / matrix dimensions that do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input sequence too short for the requested operation.
class LengthError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// NaN or Inf surfaced during optimization.
class NumericDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cosearch
