#pragma once

#include <stdexcept>
#include <string>

namespace icnn {

// Thrown on rank or dimension mismatches between tensors.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on invalid argument values (negative sizes, bad enum strings, ...).
struct ValueError : std::runtime_error {
  explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when an object is used in a state that does not permit the
// operation, e.g. backpropagating twice through a consumed graph.
struct StateError : std::runtime_error {
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a file or JSON document cannot be decoded.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a non-finite value shows up where finite math is required.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a model description is structurally valid JSON but violates
// the schema (unknown fields, missing keys, inconsistent shapes).
struct SpecError : std::runtime_error {
  explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a mathematical invariant that the library promises to
// maintain is observed to fail at runtime.
struct PropertyViolation : std::runtime_error {
  explicit PropertyViolation(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace icnn
