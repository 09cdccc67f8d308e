#pragma once

#include <stdexcept>
#include <string>

namespace anonet {

/// Invalid layer/model/run configuration (even kernel, unknown name, bad key).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Tensor or image dimensions that do not agree. A shape mismatch is a kind
/// of configuration error, so handlers for ConfigError also catch it.
class ShapeError : public ConfigError {
 public:
  explicit ShapeError(const std::string& what) : ConfigError(what) {}
};

/// Unreadable, missing or corrupt files.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values encountered where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace anonet
