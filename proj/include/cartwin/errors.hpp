#pragma once

#include <stdexcept>
#include <string>

namespace cartwin {

/// Raised when a computation fails numerically (singular covariance,
/// diverging solver, non-finite state). Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cartwin
