#pragma once

#include <stdexcept>
#include <string>

namespace odfnet {

enum class ErrorKind {
  InvalidArgument,
  Parse,
  Io,
  Degenerate,
  Compute,
};

/// Library-wide exception. Parse errors carry "path:line:" prefixes in the
/// message so callers can surface positioned diagnostics.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Compute: return "compute";
  }
  return "unknown";
}

}  // namespace odfnet
