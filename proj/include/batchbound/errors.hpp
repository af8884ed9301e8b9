#pragma once

#include <stdexcept>
#include <string>

namespace batchbound {

// Violation of a structural invariant that should be impossible for valid
// inputs (consistency breach, evasion breach, broken pigeonhole guarantee).
// The CLI maps this to exit code 2.
class InvariantBreach : public std::runtime_error {
 public:
  explicit InvariantBreach(const std::string& what) : std::runtime_error(what) {}
};

// Bad user-supplied configuration or file. CLI exit code 3.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace batchbound
