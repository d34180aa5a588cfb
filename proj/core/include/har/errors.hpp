#pragma once

#include <stdexcept>
#include <string>

namespace har {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required file is missing or unreadable.
class LoadError : public Error {
 public:
  using Error::Error;
};

// A file exists but its contents do not parse.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Parsed data violates a structural expectation (row counts, label ranges...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad user-supplied configuration (fractions out of range, k < 1, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An outage plan cannot reach its target within tolerance.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

// A random split failed a structural requirement after bounded retries.
class SplitError : public Error {
 public:
  using Error::Error;
};

// An imputer (or other estimator) cannot be fitted on the given data.
class FitError : public Error {
 public:
  using Error::Error;
};

// A model fit went numerically wrong (non-finite activations, gradients...).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace har
