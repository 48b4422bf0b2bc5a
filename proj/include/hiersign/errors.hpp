#pragma once

#include <stdexcept>
#include <string>

namespace hiersign {

// Bad experiment configuration (invalid counts, malformed config files,
// unknown keys, inconsistent sweep declarations).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset loading problems (bad magic, truncation, count mismatch).
class LoadError : public std::runtime_error {
 public:
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

// Training aborted (NaN loss, degenerate partition draw, dimension mismatch).
class TrainError : public std::runtime_error {
 public:
  explicit TrainError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hiersign
