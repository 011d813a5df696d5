#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace herdscale {

enum class ErrorCode {
  FileNotFound,
  ParseError,
  NonFiniteCoordinate,
  EmptyCloud,
  IoError,
  TooFewPoints,
  DegenerateCloud,
  CoplanarCloud,
  EmptyResult,
  InvalidHyperparameter,
  NonFiniteInput,
  DimensionMismatch,
  LengthMismatch,
  NonPositiveTarget,
  ZeroVarianceTarget,
  InvalidK,
  InvalidSchedule,
  InvalidConfig,
  MissingWeight,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::CoplanarCloud: return "CoplanarCloud";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::InvalidHyperparameter: return "InvalidHyperparameter";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonPositiveTarget: return "NonPositiveTarget";
    case ErrorCode::ZeroVarianceTarget: return "ZeroVarianceTarget";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingWeight: return "MissingWeight";
  }
  return "Unknown";
}

/// Every failure raised by the library. `code()` identifies the failure class;
/// `context()` names the stage that raised it (a feature block, a model id, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string context = {})
      : std::runtime_error(format(code, message, context)),
        code_(code),
        detail_(message),
        context_(std::move(context)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::string& context() const noexcept { return context_; }

  /// Re-raise with an outer context prepended.
  [[noreturn]] void rethrow_in(const std::string& outer) const {
    throw Error(code_, detail_, context_.empty() ? outer : outer + "/" + context_);
  }

 private:
  static std::string format(ErrorCode code, const std::string& message, const std::string& context) {
    std::string out(to_string(code));
    if (!context.empty()) out += " [" + context + "]";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  ErrorCode code_;
  std::string detail_;
  std::string context_;
};

}  // namespace herdscale
