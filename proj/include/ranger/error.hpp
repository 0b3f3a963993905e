#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ranger {

/// Stable error codes surfaced through the CLI (`--json-errors`) and tests.
enum class ErrorCode {
    EmptyVersion,
    MalformedRange,
    EmptySelection,
    InvalidSelection,
    IoError,
    SchemaError,
    XmlError,
    MissingCoordinates,
    UnorderedEvents,
    VersionMismatch,
    NoSuchRelease,
    NoSuchEdge,
    NoReleaseBefore,
    NeverAffected,
    EmptySeries,
    MissingReleaseDates,
    MissingSurface,
    SpawnError,
    InvalidArgument,
};

inline std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyVersion: return "EmptyVersion";
        case ErrorCode::MalformedRange: return "MalformedRange";
        case ErrorCode::EmptySelection: return "EmptySelection";
        case ErrorCode::InvalidSelection: return "InvalidSelection";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::XmlError: return "XmlError";
        case ErrorCode::MissingCoordinates: return "MissingCoordinates";
        case ErrorCode::UnorderedEvents: return "UnorderedEvents";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::NoSuchRelease: return "NoSuchRelease";
        case ErrorCode::NoSuchEdge: return "NoSuchEdge";
        case ErrorCode::NoReleaseBefore: return "NoReleaseBefore";
        case ErrorCode::NeverAffected: return "NeverAffected";
        case ErrorCode::EmptySeries: return "EmptySeries";
        case ErrorCode::MissingReleaseDates: return "MissingReleaseDates";
        case ErrorCode::MissingSurface: return "MissingSurface";
        case ErrorCode::SpawnError: return "SpawnError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace ranger
