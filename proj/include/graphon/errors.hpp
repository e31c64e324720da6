#pragma once

#include <stdexcept>
#include <string>

namespace graphon {

/// Invalid argument or configuration; CLI maps this to exit code 2.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numerical failure (non-convergence, indefinite operator, violated
/// spectral condition); CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace graphon
