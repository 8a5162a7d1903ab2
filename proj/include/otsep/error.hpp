#pragma once

#include <stdexcept>
#include <string>

namespace otsep {

// Invalid input data or configuration. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside a solver. The CLI maps this to exit code 1.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failure. The CLI maps this to exit code 1.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace otsep
