#pragma once

#include <stdexcept>
#include <string>

namespace cvsdeblur {

// Error taxonomy shared by the whole library. The CLI maps these to process
// exit codes: ValidationError -> 1, NumericError -> 2, IoError -> 3.

// Caller handed us inconsistent arguments, malformed metadata or data that
// violates a documented precondition.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Computation left the finite/representable range (NaN or Inf where a finite
// value is required) or an iterative solver failed in a way the caller must see.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem or serialization failure: missing file, truncated payload,
// unreadable or unwritable path.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cvsdeblur
