#pragma once

#include <stdexcept>
#include <string>

namespace plsq {

// Invalid arguments, malformed data, violated preconditions.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative procedures that fail to converge, loss of positive definiteness, etc.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures (missing input, unwritable output).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace plsq
