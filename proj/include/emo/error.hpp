#pragma once

#include <stdexcept>
#include <string>

namespace emo {

/// Base class for every failure raised by the library. Messages are single-line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration, arguments or missing inputs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace emo
