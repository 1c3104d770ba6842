#pragma once

#include <stdexcept>
#include <string>

namespace ctxvec {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes (messages name both shapes).
struct DimError : Error {
  using Error::Error;
};

// A stated precondition was violated (non-scalar loss, empty input, ...).
struct ContractError : Error {
  using Error::Error;
};

// Sequence exceeds a model's position capacity.
struct CapacityError : Error {
  using Error::Error;
};

// Index outside a valid range.
struct IndexError : Error {
  using Error::Error;
};

// Malformed file, version mismatch, or failed integrity check.
struct IoError : Error {
  using Error::Error;
};

// Invalid or unknown configuration.
struct ConfigError : Error {
  using Error::Error;
};

// A metric is undefined on the given input (no positives, zero variance).
struct MetricError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace ctxvec
