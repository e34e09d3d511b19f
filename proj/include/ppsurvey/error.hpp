#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ppsurvey {

enum class ErrorCode {
  // input validation (exit 2)
  UnknownToken,
  ParseFailure,
  MissingColumn,
  MalformedRow,
  EmptyFrame,
  EmptyInput,
  BudgetExceedsFrame,
  OverlapError,
  InvalidArgument,
  InvalidConfig,
  InvalidCurve,
  ShareOutOfRange,
  UnknownGroupKey,
  Io,
  // numerical failure (exit 3)
  NoBracket,
  NonMonotoneScore,
  SingularDesign,
  NoConvergence,
  CompleteSeparation,
  UnattainableCorrelation,
  ZeroTruth,
  ZeroMethodVariance,
  ZeroGroupTruthMean,
};

constexpr bool is_numerical(ErrorCode code) noexcept {
  return code >= ErrorCode::NoBracket;
}

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyFrame: return "EmptyFrame";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BudgetExceedsFrame: return "BudgetExceedsFrame";
    case ErrorCode::OverlapError: return "OverlapError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidCurve: return "InvalidCurve";
    case ErrorCode::ShareOutOfRange: return "ShareOutOfRange";
    case ErrorCode::UnknownGroupKey: return "UnknownGroupKey";
    case ErrorCode::Io: return "Io";
    case ErrorCode::NoBracket: return "NoBracket";
    case ErrorCode::NonMonotoneScore: return "NonMonotoneScore";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::CompleteSeparation: return "CompleteSeparation";
    case ErrorCode::UnattainableCorrelation: return "UnattainableCorrelation";
    case ErrorCode::ZeroTruth: return "ZeroTruth";
    case ErrorCode::ZeroMethodVariance: return "ZeroMethodVariance";
    case ErrorCode::ZeroGroupTruthMean: return "ZeroGroupTruthMean";
  }
  return "Unknown";
}

/// Every failure raised by the library. The component string names the
/// module that failed so the CLI can report it verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string component, const std::string& message)
      : std::runtime_error(component + ": " + std::string(to_string(code)) + ": " + message),
        code_(code),
        component_(std::move(component)),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& component() const noexcept { return component_; }
  bool numerical() const noexcept { return is_numerical(code_); }
  /// The message without the component and code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string component_;
  std::string detail_;
};

}  // namespace ppsurvey
