#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dilab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix/vector dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input violates an operation's precondition (empty batch, bad label, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value showed up in a loss, gradient or parameter.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Violation of an indexing contract (e.g. alpha(s, t) with s > t).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A strategy tried to read data outside the domain currently being trained.
class AccessError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Carries every violation found, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  explicit ConfigError(const std::string& violation)
      : ConfigError(std::vector<std::string>{violation}) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

}  // namespace dilab
