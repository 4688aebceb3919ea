#pragma once

#include <stdexcept>
#include <string>

namespace qtherm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A requested dimension exceeds kMaxDim.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// An input violates an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Numeric failures map to CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

class PositivityError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Null space of a generator has dimension != 1.
class AmbiguityError : public NumericError {
 public:
  AmbiguityError(const std::string& what, long null_dim)
      : NumericError(what), null_dim_(null_dim) {}
  long null_dim() const noexcept { return null_dim_; }

 private:
  long null_dim_;
};

class StepSizeError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace qtherm
