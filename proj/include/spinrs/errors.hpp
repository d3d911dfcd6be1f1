#pragma once

#include <stdexcept>
#include <string>

namespace spinrs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularMatrixError : Error {
  using Error::Error;
};
struct NotPositiveDefiniteError : Error {
  using Error::Error;
};
struct NotHermitianError : Error {
  using Error::Error;
};
struct EigenCollisionError : Error {
  using Error::Error;
};
struct StepTooLargeError : Error {
  using Error::Error;
};
struct IndexError : Error {
  using Error::Error;
};
// A precondition on the input point failed (interlacing, ball boundary,
// regularity margin, constraint residual, zero gauge component, ...).
struct DomainError : Error {
  using Error::Error;
};

}  // namespace spinrs
