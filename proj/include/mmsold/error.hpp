#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmsold {

enum class ErrorKind {
  NotPositiveDefinite,
  NoConvergence,
  RankDeficient,
  IllConditioned,
  InvalidBudget,
  DegenerateDenominator,
  NonFiniteState,
  ParseError,
  DimensionMismatch,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so the CLI can map it
/// to an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::InvalidBudget: return "InvalidBudget";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

}  // namespace mmsold
