#pragma once

#include <stdexcept>
#include <string>

namespace ccrcnn {

// Exit codes used by the command line tool. Every exception thrown by the
// library derives from Error and carries the code it maps to.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kNumerical = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad hyperparameters, mismatched shapes, invalid arguments.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ExitCode::kUsage, what) {}
};

// Malformed or inconsistent input files and datasets.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

// Non-finite values, degenerate statistics, failed gradient checks.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ExitCode::kNumerical, what) {}
};

}  // namespace ccrcnn
