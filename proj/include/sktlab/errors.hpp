#pragma once

#include <stdexcept>
#include <string>

namespace sktlab {

/// Raised when a model definition is inconsistent (dimension mismatch,
/// constant term in P, kappa out of range, ...).
class ModelError : public std::invalid_argument {
 public:
  explicit ModelError(const std::string& what) : std::invalid_argument("model: " + what) {}
};

/// Raised for malformed user input: degenerate regions, bad grid sizes,
/// too-short trajectories, unreadable manifests.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a discrete state is not finite where a finite one is required.
class NumericalStateError : public std::runtime_error {
 public:
  explicit NumericalStateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sktlab
