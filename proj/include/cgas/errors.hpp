#pragma once

#include <stdexcept>
#include <string>

namespace cgas {

// Base class for every failure raised by the library. The CLI maps these to
// exit code 3 (numerical failure) except SpecError, which maps to 2.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Evaluation at a coincident point / kernel singularity.
class SingularityError : public Error {
public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

// Precondition of an operation violated by the caller.
class ContractError : public Error {
public:
  using Error::Error;
};

// Iterative solver ran out of budget or diverged.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_;
};

// Malformed run specification (unknown key, missing field, bad type).
class SpecError : public Error {
public:
  using Error::Error;
};

} // namespace cgas
