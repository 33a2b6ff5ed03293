#pragma once

#include <stdexcept>
#include <string>

namespace ordint {

// Failure categories; the CLI maps each to its own exit code.
enum class ErrorKind { config = 1, data = 2, sampler = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct SamplerError : Error {
  explicit SamplerError(const std::string& what) : Error(ErrorKind::sampler, what) {}
};

// Argument outside a distribution's support or a transform's domain.
struct DomainError : DataError {
  explicit DomainError(const std::string& what) : DataError(what) {}
};

}  // namespace ordint
