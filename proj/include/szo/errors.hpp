#pragma once

#include <stdexcept>
#include <string>

namespace szo {

/// Invalid run or check parameters.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values during optimization.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace szo
