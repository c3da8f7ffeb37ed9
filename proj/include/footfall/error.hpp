#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace footfall {

// Malformed input text (CSV, JSON payloads).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A specific data row could not be parsed. `row()` is the 1-based line number.
class RowError : public FormatError {
 public:
  RowError(std::size_t row, const std::string& what)
      : FormatError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Well-formed input whose values break an invariant (non-positive scale,
// threshold out of range, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation called in the wrong state (backward before forward, push after stop).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace footfall
