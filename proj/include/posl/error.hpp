#pragma once

#include <stdexcept>
#include <string>

namespace posl {

/// Coarse failure class; the CLI prints it as the machine-parsable prefix of
/// its one-line error message and maps it to an exit status.
enum class ErrorCategory { config, io, data, invalid_argument, runtime };

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::data: return "data";
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::runtime: return "runtime";
  }
  return "runtime";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what)
      : Error(ErrorCategory::invalid_argument, what) {}
};

}  // namespace posl
