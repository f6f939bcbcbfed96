#pragma once

#include <stdexcept>
#include <string>

namespace adloop {

/// Base for every error the library raises. exit_code() maps onto the CLI
/// contract: 1 config, 2 runtime assertion, 3 I/O.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual int exit_code() const noexcept { return 2; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 1; }
};

/// Precondition or invariant violated inside a signal/simulation operation.
class SignalError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 3; }
};

}  // namespace adloop
