#pragma once

#include <stdexcept>
#include <string>

namespace simgap {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  ok = 0,
  failure = 1,
  config = 2,
  oracle = 3,
  resource = 4,
  solver = 5,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::failure; }
};

/// Caller passed arguments of the wrong shape (dimension mismatch, bad index).
class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

/// A state fell outside the domain on which a map or bound is trusted.
class DomainError : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  OracleError(const std::string& what, int retries = 0)
      : Error(what), retries_(retries) {}
  int retries() const noexcept { return retries_; }
  ExitCode exit_code() const noexcept override { return ExitCode::oracle; }

 private:
  int retries_;
};

class ResourceError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::resource; }
};

class SolverError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::solver; }
};

}  // namespace simgap
