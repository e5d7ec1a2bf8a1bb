#pragma once

#include <stdexcept>
#include <string>

namespace stormvi {

// Unreadable/ill-formed input data (rasters, CSVs, configs).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or failed numeric procedures at runtime.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stormvi
