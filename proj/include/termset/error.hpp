#pragma once

#include <stdexcept>
#include <string>

namespace termset {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, violated preconditions, unknown terms.
class ValidationError : public Error {
public:
  using Error::Error;
};

// An iterative solver ran out of budget before meeting its tolerance.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

class NotFoundError : public Error {
public:
  using Error::Error;
};

// A session API call arrived in the wrong state.
class StateError : public Error {
public:
  using Error::Error;
};

// Another call currently holds the session.
class BusyError : public Error {
public:
  using Error::Error;
};

}  // namespace termset
