#pragma once

#include <stdexcept>
#include <string>

namespace rspg {

// Error taxonomy. Every failure mode raised by the library derives from
// std::runtime_error so callers can catch coarsely; the concrete type tells
// the harness which exit path to take.

// Shape mismatches (d < r, incompatible operands, r > d, ...).
struct dimension_error : std::runtime_error {
  explicit dimension_error(const std::string& what) : std::runtime_error("dimension error: " + what) {}
};

// A precondition the caller is responsible for (tangent base mismatch,
// stale caches, estimator state misuse).
struct contract_error : std::runtime_error {
  explicit contract_error(const std::string& what) : std::runtime_error("contract error: " + what) {}
};

// An argument outside its documented range (gamma <= 0, negative threshold, ...).
struct parameter_error : std::runtime_error {
  explicit parameter_error(const std::string& what) : std::runtime_error("parameter error: " + what) {}
};

// Non-finite values or a linear solve that lost all accuracy.
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& what) : std::runtime_error("numerical error: " + what) {}
};

// Malformed files (matrix containers, CSV cells).
struct format_error : std::runtime_error {
  explicit format_error(const std::string& what) : std::runtime_error("format error: " + what) {}
};

// A combination the library deliberately does not implement.
struct unsupported_error : std::runtime_error {
  explicit unsupported_error(const std::string& what) : std::runtime_error("unsupported: " + what) {}
};

// Bad experiment configuration (harness level).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error("config error: " + what) {}
};

}  // namespace rspg
