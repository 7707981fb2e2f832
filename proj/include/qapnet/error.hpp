#pragma once

#include <stdexcept>
#include <string>

namespace qapnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument (shape, range, finiteness) was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative routine ran out of its iteration budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A derived problem would exceed the configured size cap.
class SizeLimitError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input (instance files, checkpoints, datasets).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during a numerical computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace qapnet
