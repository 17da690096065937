#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace curvadv {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input (non-finite values, shape mismatch).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Not enough points / neighbors / samples for the requested operation.
class SizeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Train-mode batch normalization needs at least two samples.
class BatchSizeError : public SizeError {
 public:
  using SizeError::SizeError;
};

/// Missing or inconsistent configuration (e.g. frame-based attack without frames).
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Unknown sample id in an AdvStore or dataset.
class LookupError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Non-finite loss or gradient encountered during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File content does not follow its format; carries the 1-based line number.
class ParseError : public IoError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : IoError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A cached artifact was produced with different parameters or inputs.
class StaleCacheError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace curvadv
