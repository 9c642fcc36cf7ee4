#pragma once

#include <stdexcept>
#include <string>

namespace matd3 {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape/size violation; carries the sizes so callers can report precisely.
struct DimensionError : Error {
  DimensionError(const std::string& what, long expected_, long actual_)
      : Error(what + " (expected " + std::to_string(expected_) + ", got " +
              std::to_string(actual_) + ")"),
        expected(expected_),
        actual(actual_) {}
  long expected;
  long actual;
};

struct NonFiniteError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace matd3
