#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tokdyn {

enum class ErrorCode {
    ZeroVector,
    DimensionTooSmall,
    OverlapOutOfRange,
    NonCenteredLaw,
    WrongScaling,
    NeedsSigmaEstimate,
    TimeMismatch,
    InsufficientTrials,
    InvalidArgument,
    NumericalFailure,
    ConfigError,
    VersionMismatch,
    ReplayMismatch,
};

std::string_view to_string(ErrorCode code);

// Errors raised by the library carry a code so callers (and the CLI's exit
// status mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
        case ErrorCode::OverlapOutOfRange: return "OverlapOutOfRange";
        case ErrorCode::NonCenteredLaw: return "NonCenteredLaw";
        case ErrorCode::WrongScaling: return "WrongScaling";
        case ErrorCode::NeedsSigmaEstimate: return "NeedsSigmaEstimate";
        case ErrorCode::TimeMismatch: return "TimeMismatch";
        case ErrorCode::InsufficientTrials: return "InsufficientTrials";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NumericalFailure: return "NumericalFailure";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::ReplayMismatch: return "ReplayMismatch";
    }
    return "Unknown";
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) throw Error(code, what);
}

}  // namespace tokdyn
