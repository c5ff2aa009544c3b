#pragma once

#include <stdexcept>
#include <string>

namespace fbmp {

/// Bad arguments or inconsistent configuration. CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Missing, malformed or inconsistent data on disk or in memory. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Singular regressions, divergence and other numerical failures. CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SegmentationError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace fbmp
