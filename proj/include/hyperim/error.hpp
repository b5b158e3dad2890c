#pragma once

#include <stdexcept>
#include <string>

namespace hyperim {

// Base class for every engineering failure raised by the library.
// Negative mathematical findings are never reported through exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidRange : public Error {
 public:
  using Error::Error;
};

class InvalidExponent : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SizeMismatch : public Error {
 public:
  using Error::Error;
};

class BlowUp : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class StageError : public Error {
 public:
  using Error::Error;
};

}  // namespace hyperim
