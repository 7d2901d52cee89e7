#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polyrad {

enum class ErrorKind {
  InvalidSpec,
  InvalidControls,
  BadRadius,
  NonpositiveU,
  NonfiniteState,
  OutOfRange,
  TailNotIntegrable,
  NotSeparatrix,
  NotSurvived,
  BracketFailure,
  IndeterminateShot,
  Config,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidControls: return "InvalidControls";
    case ErrorKind::BadRadius: return "BadRadius";
    case ErrorKind::NonpositiveU: return "NonpositiveU";
    case ErrorKind::NonfiniteState: return "NonfiniteState";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::TailNotIntegrable: return "TailNotIntegrable";
    case ErrorKind::NotSeparatrix: return "NotSeparatrix";
    case ErrorKind::NotSurvived: return "NotSurvived";
    case ErrorKind::BracketFailure: return "BracketFailure";
    case ErrorKind::IndeterminateShot: return "IndeterminateShot";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable kind; the CLI maps kinds to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace polyrad
