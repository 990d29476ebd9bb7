#pragma once

#include <stdexcept>
#include <string>

namespace recourse {

// Base of all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad inputs: malformed configs, shape/key mismatches, invalid data.
// The CLI maps these to exit code 2.
struct ValidationError : Error {
  using Error::Error;
};

// Failures at run time (diverged optimization, I/O). CLI exit code 3.
struct RuntimeFailure : Error {
  using Error::Error;
};

struct CycleDetected : ValidationError {
  using ValidationError::ValidationError;
};
struct UnknownNode : ValidationError {
  using ValidationError::ValidationError;
};
struct DuplicateNode : ValidationError {
  using ValidationError::ValidationError;
};
struct DuplicateEdge : ValidationError {
  using ValidationError::ValidationError;
};
struct ShapeMismatch : ValidationError {
  using ValidationError::ValidationError;
};
struct DegenerateData : ValidationError {
  using ValidationError::ValidationError;
};
struct SingleClassData : ValidationError {
  using ValidationError::ValidationError;
};
struct KeyMismatch : ValidationError {
  using ValidationError::ValidationError;
};
struct MissingColumn : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyInput : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyFile : ValidationError {
  using ValidationError::ValidationError;
};
struct ParseError : ValidationError {
  using ValidationError::ValidationError;
};
struct UnparseableValue : ValidationError {
  using ValidationError::ValidationError;
};
struct IncompatibleSpec : ValidationError {
  using ValidationError::ValidationError;
};
struct NonFiniteLoss : RuntimeFailure {
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace recourse
