#pragma once

#include <stdexcept>
#include <string>

namespace tssr {

// Bad input, bad configuration, or a violated precondition. Maps to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system or format problems at run time. Maps to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown (non-finite loss or gradient). Maps to exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tssr
