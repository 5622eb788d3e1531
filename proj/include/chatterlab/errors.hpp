#pragma once

#include <stdexcept>
#include <string>

namespace chatterlab {

// Raised when an input violates a documented precondition.
class precondition_error : public std::invalid_argument {
 public:
  explicit precondition_error(const std::string& what) : std::invalid_argument(what) {}
};

// Raised when an iterative computation fails to converge.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace chatterlab
