#pragma once

#include <stdexcept>
#include <string>

namespace lqgcn {

// Malformed or inconsistent input data (files, covers, graphs).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes that cannot be combined.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values or a diverged optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void shape_mismatch(const char* op, std::size_t lhs, std::size_t rhs) {
  throw ShapeError(std::string(op) + ": dimension mismatch (" + std::to_string(lhs) + " vs " +
                   std::to_string(rhs) + ")");
}

}  // namespace detail
}  // namespace lqgcn
