#pragma once

#include <stdexcept>
#include <string>

namespace lire {

// Exit codes used by the command-line front end.
enum class ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what), code_(code), module_(module) {}

  ExitCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ExitCode code_;
  std::string module_;
};

class UsageError : public Error {
 public:
  UsageError(const std::string& module, const std::string& what)
      : Error(ExitCode::kUsage, module, what) {}
};

class DataError : public Error {
 public:
  DataError(const std::string& module, const std::string& what)
      : Error(ExitCode::kData, module, what) {}
};

class NumericError : public Error {
 public:
  NumericError(const std::string& module, const std::string& what)
      : Error(ExitCode::kNumeric, module, what) {}
};

}  // namespace lire
