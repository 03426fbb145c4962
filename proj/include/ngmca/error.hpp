#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ngmca {

enum class ErrorCode {
  RankDeficient,
  NonConvergence,
  ShapeMismatch,
  NonFinite,
  RankCollapse,
  EmptyInput,
  ZeroSignal,
  PeakOutOfRange,
  DegenerateSpan,
  ZeroVector,
  SingularMatrix,
  UnknownAxis,
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::RankCollapse: return "RankCollapse";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ZeroSignal: return "ZeroSignal";
    case ErrorCode::PeakOutOfRange: return "PeakOutOfRange";
    case ErrorCode::DegenerateSpan: return "DegenerateSpan";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::UnknownAxis: return "UnknownAxis";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ngmca
