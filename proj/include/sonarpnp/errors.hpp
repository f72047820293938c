#pragma once

#include <stdexcept>
#include <string>

namespace sonarpnp {

enum class ErrorKind {
  DegenerateInput,
  DegenerateConfiguration,
  SolverFailure,
  RecoveryFailure,
  NoRealSolution,
  GenerationFailure,
  InvalidInput,
};

const char* to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind lets
/// callers (the CLI, the sweep runner) classify failures without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::SolverFailure: return "SolverFailure";
    case ErrorKind::RecoveryFailure: return "RecoveryFailure";
    case ErrorKind::NoRealSolution: return "NoRealSolution";
    case ErrorKind::GenerationFailure: return "GenerationFailure";
    case ErrorKind::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

}  // namespace sonarpnp
