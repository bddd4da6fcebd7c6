#pragma once

#include <stdexcept>
#include <string>

namespace isac {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input documents: bad JSON, unknown fields, wrong shapes.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally well-formed input that violates a model requirement
// (indefinite weights, probabilities outside [0, 1], size mismatches).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Operation invoked on a problem size it does not support.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Failed factorizations and other numerical breakdowns.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A computed object lacks the structure later stages rely on, e.g. a
// decision map whose Communicate set is not upward closed along a column.
// Carries the offending row or column index.
class StructuralError : public Error {
 public:
  StructuralError(const std::string& message, int index)
      : Error(message), index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

// Caller broke a documented precondition, e.g. passing a measurement
// payload for a slot in which no measurement can have been delivered.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Artifacts on disk do not belong to the scenario being processed.
class ArtifactMismatchError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures while reading inputs or writing outputs.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace isac
