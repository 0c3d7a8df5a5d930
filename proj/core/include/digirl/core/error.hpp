#pragma once

#include <stdexcept>
#include <string>

namespace digirl {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violated a documented invariant or precondition.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite gradient or loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or experiment specification.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace digirl
