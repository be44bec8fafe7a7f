#pragma once

#include <stdexcept>
#include <string>

namespace flashrank {

/// Failure category. Maps one-to-one onto CLI exit codes and HTTP statuses.
enum class ErrorKind {
  kValidation,  // bad input or config (exit 1, HTTP 400)
  kIo,          // filesystem / parse of on-disk data (exit 2)
  kRemote,      // LLM or cross-encoder backend (exit 3, HTTP 502)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error ValidationError(const std::string& message) {
  return Error(ErrorKind::kValidation, message);
}
inline Error IoError(const std::string& message) {
  return Error(ErrorKind::kIo, message);
}
inline Error RemoteError(const std::string& message) {
  return Error(ErrorKind::kRemote, message);
}

inline int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
      return 1;
    case ErrorKind::kIo:
      return 2;
    case ErrorKind::kRemote:
      return 3;
  }
  return 1;
}

}  // namespace flashrank
