#pragma once

#include <stdexcept>
#include <string>

namespace isohash {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shapes of two operands do not agree.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Malformed input data or a file that cannot be parsed.
class DataError : public Error {
public:
  using Error::Error;
};

/// The optimizer produced a non-finite value or diverged.
class SolverError : public Error {
public:
  using Error::Error;
};

/// A theorem-backed check found a counterexample.
class CheckFailure : public Error {
public:
  using Error::Error;
};

}  // namespace isohash
