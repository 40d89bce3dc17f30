#pragma once

#include <stdexcept>
#include <string>

namespace stpp {

// Bad inputs: missing files, malformed rows, invalid configuration.
// Mapped to exit/status code 2 at the C boundary.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: non-convergence, singular systems, invalid state.
// Mapped to exit/status code 1 at the C boundary.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stpp
