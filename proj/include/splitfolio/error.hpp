#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace splitfolio {

enum class ErrorKind {
  MissingColumn,
  NonPositivePrice,
  NegativeDividend,
  UnsortedDates,
  UnknownIndustryCode,
  DuplicateEntry,
  InvalidPeriod,
  EmptyPeriod,
  MissingData,
  InvalidCorrelation,
  ZeroVariance,
  InsufficientObservations,
  InvalidParams,
  PreconditionViolation,
  DimensionMismatch,
  ParseError,
  SingleCluster,
  KTooLarge,
  InvalidAssignment,
  UniverseTooSmall,
  GroupTooSmall,
  ClusterTooSmall,
  MissingReturn,
  DegenerateGroup,
  ChainMismatch,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::NonPositivePrice: return "NonPositivePrice";
    case ErrorKind::NegativeDividend: return "NegativeDividend";
    case ErrorKind::UnsortedDates: return "UnsortedDates";
    case ErrorKind::UnknownIndustryCode: return "UnknownIndustryCode";
    case ErrorKind::DuplicateEntry: return "DuplicateEntry";
    case ErrorKind::InvalidPeriod: return "InvalidPeriod";
    case ErrorKind::EmptyPeriod: return "EmptyPeriod";
    case ErrorKind::MissingData: return "MissingData";
    case ErrorKind::InvalidCorrelation: return "InvalidCorrelation";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::InsufficientObservations: return "InsufficientObservations";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SingleCluster: return "SingleCluster";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::InvalidAssignment: return "InvalidAssignment";
    case ErrorKind::UniverseTooSmall: return "UniverseTooSmall";
    case ErrorKind::GroupTooSmall: return "GroupTooSmall";
    case ErrorKind::ClusterTooSmall: return "ClusterTooSmall";
    case ErrorKind::MissingReturn: return "MissingReturn";
    case ErrorKind::DegenerateGroup: return "DegenerateGroup";
    case ErrorKind::ChainMismatch: return "ChainMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind and a
/// message naming the offending row, column, ticker, group or field.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

  /// Validation failures map to CLI exit status 2, everything else to 1.
  bool is_validation() const noexcept {
    switch (kind_) {
      case ErrorKind::Io:
      case ErrorKind::ParseError:
        return false;
      default:
        return true;
    }
  }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace splitfolio
