#pragma once

#include <stdexcept>
#include <string>

namespace cogspeech {

// Base for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or stream.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Missing or mismatched inputs (files, subject ids).
class InputError : public Error {
 public:
  using Error::Error;
};

// A statistical or numerical precondition does not hold for the data.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DegenerateColumnError : public PreconditionError {
 public:
  explicit DegenerateColumnError(std::string column)
      : PreconditionError("zero-variance column '" + column + "'"),
        column_(std::move(column)) {}

  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class ConvergenceError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

}  // namespace cogspeech
