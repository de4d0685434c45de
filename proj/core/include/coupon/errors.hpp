// Error taxonomy shared across the library. The CLI maps these onto
// distinct exit codes.
#pragma once

#include <stdexcept>
#include <string>

namespace coupon {

// Precondition or API-contract violation: bad arguments, mismatched keys,
// empty inputs where at least one element is required.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Matrix dimension mismatch. Messages name both offending shapes.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Malformed or inconsistent configuration (config files, population specs).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failure; messages include the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Request outside an operation's supported instance size.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric has no defined value on the given input (e.g. AUC on a
// single-class label vector).
class UndefinedMetricError : public ContractError {
 public:
  using ContractError::ContractError;
};

// A library invariant was broken. This signals a bug, not user error.
class InvariantBreach : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Training diverged (non-finite loss); message carries epoch/batch context.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace coupon
