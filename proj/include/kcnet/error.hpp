#pragma once

#include <stdexcept>
#include <string>

namespace kcnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad shape, out-of-range count, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A file or byte buffer did not follow its declared format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A configuration key or value was rejected.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace kcnet
