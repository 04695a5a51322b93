#pragma once

#include <stdexcept>
#include <string>

namespace sliceforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model document (not valid JSON, wrong value types).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed document that violates a model rule. The message names the
/// offending entity id.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Generalized inverse of a loss function could not be bracketed.
class InversionError : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix sizes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Internal failure of a numerical subsolver (singular pivot, unbounded LP).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace sliceforge
