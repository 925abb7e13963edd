#pragma once

#include <stdexcept>
#include <string>

namespace zadre {

// Error taxonomy. Everything derives from Error (itself a std::runtime_error)
// so callers can catch coarsely; the CLI maps categories onto exit codes.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (y < 0, tau outside (0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Distribution or model parameters violate their constraints.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Mismatched lengths or dimensions between related containers.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A dataset or matrix is too small for the requested operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration (bad JSON, unknown keys, out-of-range settings).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (CSV parse failures, non-finite fields, schema violations).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Model fitting failed and no fallback applies.
class FitError : public Error {
 public:
  using Error::Error;
};

/// An iterative numeric routine failed to converge within its budget.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace zadre
