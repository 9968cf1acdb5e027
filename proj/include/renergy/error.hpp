#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace renergy {

enum class ErrorKind {
  NonPositiveImaginaryPart,
  NonPositiveParameter,
  PrecisionUnreachable,
  LatticePointSingularity,
  DivergentSeries,
  CovolumeMismatch,
  DegenerateBasis,
  ExtrapolationUnstable,
  InvalidGrid,
  CoincidentPoints,
  VolumeNotNormalized,
  LineSearchStall,
  NoConvergence,
  EmptySet,
  UnderResolved,
  GridMismatch,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonPositiveImaginaryPart: return "NonPositiveImaginaryPart";
    case ErrorKind::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorKind::PrecisionUnreachable: return "PrecisionUnreachable";
    case ErrorKind::LatticePointSingularity: return "LatticePointSingularity";
    case ErrorKind::DivergentSeries: return "DivergentSeries";
    case ErrorKind::CovolumeMismatch: return "CovolumeMismatch";
    case ErrorKind::DegenerateBasis: return "DegenerateBasis";
    case ErrorKind::ExtrapolationUnstable: return "ExtrapolationUnstable";
    case ErrorKind::InvalidGrid: return "InvalidGrid";
    case ErrorKind::CoincidentPoints: return "CoincidentPoints";
    case ErrorKind::VolumeNotNormalized: return "VolumeNotNormalized";
    case ErrorKind::LineSearchStall: return "LineSearchStall";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::UnderResolved: return "UnderResolved";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Precondition violations, as opposed to numerical failures.
  bool is_usage_error() const noexcept {
    switch (kind_) {
      case ErrorKind::PrecisionUnreachable:
      case ErrorKind::ExtrapolationUnstable:
      case ErrorKind::LineSearchStall:
      case ErrorKind::NoConvergence:
      case ErrorKind::UnderResolved:
        return false;
      default:
        return true;
    }
  }

 private:
  ErrorKind kind_;
};

}  // namespace renergy
