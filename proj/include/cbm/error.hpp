#pragma once

#include <stdexcept>
#include <string>

namespace cbm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad inputs: files, formats, shapes, argument ranges. CLI exit code 2.
struct DataError : Error {
  using Error::Error;
};

struct IoError : DataError {
  using DataError::DataError;
};
struct FormatError : DataError {
  using DataError::DataError;
};
struct InvalidSpec : DataError {
  using DataError::DataError;
};
struct ShapeMismatch : DataError {
  using DataError::DataError;
};
struct InvalidR : DataError {
  using DataError::DataError;
};
struct TooLarge : DataError {
  using DataError::DataError;
};
struct EmptyInput : DataError {
  using DataError::DataError;
};
struct EmptyBatch : DataError {
  using DataError::DataError;
};

// Failures discovered during computation. CLI exit code 3.
struct NumericError : Error {
  using Error::Error;
};

struct DegenerateCovariance : NumericError {
  using NumericError::NumericError;
};
struct EigenFailure : NumericError {
  using NumericError::NumericError;
};
struct ZeroMatrix : NumericError {
  using NumericError::NumericError;
};
struct NonConvergence : NumericError {
  using NumericError::NumericError;
};
struct DegenerateProblem : NumericError {
  using NumericError::NumericError;
};

struct ZeroVarianceRow : NumericError {
  int row;
  explicit ZeroVarianceRow(int r)
      : NumericError("row " + std::to_string(r) + " has zero variance"), row(r) {}
};

}  // namespace cbm
