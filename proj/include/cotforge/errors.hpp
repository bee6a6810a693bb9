#pragma once

#include <stdexcept>
#include <string>

namespace cotforge {

/// Bad configuration, CLI usage, or unreadable inputs. Maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A record or dataset violates a data-model invariant. Maps to exit code 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal consistency check failed. Maps to exit code 3.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-sample evolution failure; the sample is skipped, the run continues.
class SampleFailure : public std::runtime_error {
 public:
  SampleFailure(std::string reason, const std::string& what)
      : std::runtime_error(what), reason_(std::move(reason)) {}
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};

}  // namespace cotforge
