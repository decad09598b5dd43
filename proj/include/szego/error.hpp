#pragma once

#include <stdexcept>
#include <string>

namespace szego {

/// Failure categories. The CLI maps `Validation` to exit code 2 and every
/// other kind to exit code 3.
enum class ErrorKind {
  Validation,
  NonFiniteState,
  TruncationBreach,
  DegenerateParameters,
  NoContraction,
  SigmaCheckFailed,
  NewtonDiverged,
  OrderingViolated,
  InequalityViolated,
  SearchFailed,
  InsufficientSamples,
  Eigensolver,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Validation: return "Validation";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::TruncationBreach: return "TruncationBreach";
    case ErrorKind::DegenerateParameters: return "DegenerateParameters";
    case ErrorKind::NoContraction: return "NoContraction";
    case ErrorKind::SigmaCheckFailed: return "SigmaCheckFailed";
    case ErrorKind::NewtonDiverged: return "NewtonDiverged";
    case ErrorKind::OrderingViolated: return "OrderingViolated";
    case ErrorKind::InequalityViolated: return "InequalityViolated";
    case ErrorKind::SearchFailed: return "SearchFailed";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::Eigensolver: return "Eigensolver";
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

}  // namespace szego
