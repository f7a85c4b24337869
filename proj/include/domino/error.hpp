#pragma once

#include <stdexcept>
#include <string>

namespace domino {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong region, bad weights, unreadable file.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A check that can only fail through an implementation bug
/// (e.g. the spider step not rescaling P by a constant).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Quadrature, interpolation or optimization did not reach its tolerance.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// Phase classification could not decide between rough and smooth.
class Indeterminate : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// The empirical limit shape has no interior cell matching the requested slope.
class NotResolved : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

}  // namespace domino
