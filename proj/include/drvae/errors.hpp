#pragma once

#include <stdexcept>
#include <string>

namespace drvae {

// Error taxonomy. The CLI maps each class onto a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible matrix/tensor shapes (messages name both shapes).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input value outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API precondition (non-scalar loss, empty test set, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration (bad k, negative weight, unknown sweep parameter).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file: wrong shape, bad schema, version mismatch.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// Numeric failure at runtime (non-finite loss, resampling exhausted).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace drvae
