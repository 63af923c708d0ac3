#pragma once

#include <stdexcept>
#include <string>

namespace wifislam {

inline constexpr const char* kVersion = "0.1.0";

// Malformed or inconsistent input data (files, traces, configs).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown: degenerate inputs, non-finite results, solver failure.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wifislam
