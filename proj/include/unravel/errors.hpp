#pragma once

#include <stdexcept>
#include <string>

namespace unravel {

// Bad input: malformed scenario files, violated preconditions. CLI exit 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what)
      : std::runtime_error(what) {}
};

// A solver could not produce a result (model assumptions violated,
// non-termination guard tripped). CLI exit 3.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace unravel
