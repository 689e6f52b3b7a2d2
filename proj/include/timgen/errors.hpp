#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace timgen {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Timestamps out of order within a user sequence.
class OrderingError : public Error {
 public:
  using Error::Error;
};

class OutOfVocabulary : public Error {
 public:
  using Error::Error;
};

/// Sequence longer than the configured maximum.
class LengthError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. `line()` is 1-based, 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// NaN or infinity produced where a finite value is required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class CheckpointVersionError : public Error {
 public:
  using Error::Error;
};

class CheckpointTruncatedError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint manifest disagrees with the model layout (missing tensor or wrong shape).
class CheckpointManifestError : public Error {
 public:
  using Error::Error;
};

}  // namespace timgen
