#pragma once

#include <stdexcept>
#include <string>

namespace bts {

enum class ErrorCode {
    InvalidArgument,
    NotFound,
    InvalidInstance,
    LevelExhausted,
    LevelMismatch,
    ScaleMismatch,
    ScaleOverflow,
    DomainError,
    IncompleteGroup,
    MissingEvk,
    EmptySchedule,
    UnsupportedOp,
    ParseError,
    TraceError,
    CapacityError,
    ContentionError,
};

inline const char* error_name(ErrorCode c)
{
    switch (c) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::InvalidInstance: return "InvalidInstance";
    case ErrorCode::LevelExhausted: return "LevelExhausted";
    case ErrorCode::LevelMismatch: return "LevelMismatch";
    case ErrorCode::ScaleMismatch: return "ScaleMismatch";
    case ErrorCode::ScaleOverflow: return "ScaleOverflow";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::IncompleteGroup: return "IncompleteGroup";
    case ErrorCode::MissingEvk: return "MissingEvk";
    case ErrorCode::EmptySchedule: return "EmptySchedule";
    case ErrorCode::UnsupportedOp: return "UnsupportedOp";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::TraceError: return "TraceError";
    case ErrorCode::CapacityError: return "CapacityError";
    case ErrorCode::ContentionError: return "ContentionError";
    }
    return "Unknown";
}

/// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace bts
