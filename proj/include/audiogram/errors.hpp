#pragma once

#include <stdexcept>
#include <string>

namespace audiogram {

// Base of every error raised by the library. The CLI maps the two families
// below onto exit codes 2 (input/parameter) and 3 (pipeline stage).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller input: malformed files, out-of-domain arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

// A stage could not produce a result from otherwise valid input.
class StageError : public Error {
 public:
  using Error::Error;
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
};

class ParameterError : public InputError {
 public:
  using InputError::InputError;
};

class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

class IoError : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateError : public StageError {
 public:
  using StageError::StageError;
};

class InsufficientDataError : public StageError {
 public:
  using StageError::StageError;
};

class LayoutError : public StageError {
 public:
  using StageError::StageError;
};

class RectificationFailed : public StageError {
 public:
  using StageError::StageError;
};

class ApproximationFailed : public StageError {
 public:
  using StageError::StageError;
};

class InterpretationFailed : public StageError {
 public:
  using StageError::StageError;
};

}  // namespace audiogram
