#pragma once

// Exception types shared by every fwalk module. Each carries a stable kind
// tag so the CLI can map failures onto exit codes.

#include <stdexcept>
#include <string>

namespace fwalk {

enum class ErrorKind {
  IndistinguishableAtDepth,
  PrefixTooShort,
  MemoryBudgetExceeded,
  NotGenerating,
  NoConvergence,
  ZeroCoordinate,
  DegenerateMatrix,
  InsufficientDepth,
  DepthTooShallow,
  NotSchottky,
  InvalidArgument,
  Config,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::IndistinguishableAtDepth: return "IndistinguishableAtDepth";
    case ErrorKind::PrefixTooShort: return "PrefixTooShort";
    case ErrorKind::MemoryBudgetExceeded: return "MemoryBudgetExceeded";
    case ErrorKind::NotGenerating: return "NotGenerating";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ZeroCoordinate: return "ZeroCoordinate";
    case ErrorKind::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorKind::InsufficientDepth: return "InsufficientDepth";
    case ErrorKind::DepthTooShallow: return "DepthTooShallow";
    case ErrorKind::NotSchottky: return "NotSchottky";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace fwalk
