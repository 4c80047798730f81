#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ndec {

enum class ErrorCode {
  InvalidArgument,
  InvalidSession,
  InsufficientData,
  BadMagic,
  VersionMismatch,
  TruncatedPayload,
  Io,
  ConfigMismatch,
  ShapeMismatch,
  NumericalFault,
  DegenerateLabels,
  TooShort,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidSession: return "InvalidSession";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::Io: return "Io";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NumericalFault: return "NumericalFault";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::TooShort: return "TooShort";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an ndec::Error carrying a code
/// that callers (and the CLI) can branch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace ndec
