#pragma once

#include <stdexcept>
#include <string>

namespace tkgc {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes are incompatible with the requested operation.
struct ShapeError : Error {
  using Error::Error;
};

// An operation produced NaN or Inf from finite inputs.
struct NumericError : Error {
  using Error::Error;
};

// Malformed or inconsistent dataset files / contents.
struct DataError : Error {
  using Error::Error;
};

// Bad configuration value or unknown configuration key.
struct ConfigError : Error {
  using Error::Error;
};

// Checkpoint and report file problems.
struct IoError : Error {
  using Error::Error;
};

}  // namespace tkgc
