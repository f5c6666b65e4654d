#pragma once

#include <stdexcept>
#include <string>

namespace hrp {

// Invalid configuration or arguments; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a precondition (shape mismatch and the like).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Training produced a non-finite loss; `snapshot` carries diagnostic text.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::string snapshot)
      : std::runtime_error(what), snapshot_(std::move(snapshot)) {}
  const std::string& snapshot() const { return snapshot_; }

 private:
  std::string snapshot_;
};

}  // namespace hrp
