#pragma once

#include <stdexcept>
#include <string>

namespace cofarq {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// All observed gains are (numerically) zero: no unbiased estimate exists.
struct DegenerateChannelError : std::runtime_error {
  explicit DegenerateChannelError(const std::string& what)
      : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cofarq
