#pragma once

#include <stdexcept>
#include <string>

namespace spherad {

// Error families map onto CLI exit codes: usage errors (1) are raised by the
// argument parser, DataError and subclasses (2) cover file/validation
// problems, NumericError (3) covers non-finite values and divergence.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : DataError {
  using DataError::DataError;
};

struct ConfigError : DataError {
  using DataError::DataError;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spherad
