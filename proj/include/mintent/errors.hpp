#pragma once

#include <stdexcept>
#include <string>

namespace mintent {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameters or CLI configuration. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inputs that violate a data contract (degenerate timelines, unknown items, ...).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical faults during training (non-finite gradients). Exit code 1.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint format, version or shape problems.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mintent
