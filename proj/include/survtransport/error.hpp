#pragma once

#include <stdexcept>
#include <string>

namespace survtransport {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed data, unmet preconditions, inconsistent configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A solver or estimator failed on otherwise valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SeparationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace survtransport
