#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace unimoco {

/// Base class for every error raised by the library. Messages are short and
/// stable so callers (and tests) can match on them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A training step produced a non-finite loss or parameters, or an embedding
/// collapsed to zero. The state passed to the step is left untouched.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::uint64_t step)
      : Error("divergence"), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

/// Normalizing a zero (or non-finite) vector.
class DegenerateVectorError : public Error {
 public:
  DegenerateVectorError() : Error("degenerate vector") {}
};

/// Configuration schema violation; carries one entry per offending key.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> items)
      : Error(join(items)), items_(std::move(items)) {}
  const std::vector<std::string>& items() const { return items_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid config";
    for (const auto& item : items) out += "\n  - " + item;
    return out;
  }
  std::vector<std::string> items_;
};

/// Malformed or truncated container file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace unimoco
