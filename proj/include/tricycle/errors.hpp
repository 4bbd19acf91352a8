#pragma once

#include <stdexcept>
#include <string>

namespace tricycle {

/// Tensor extents or image sizes that violate an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN/Inf produced during a forward or backward pass.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (PGM headers, checkpoints, manifests, configs).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs that are well formed but unusable (empty manifests, no valid pixels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command lines and configuration keys or values.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace tricycle
