#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ldsp {

enum class ErrorCode {
    NonFiniteInput,
    AllZeroDifferences,
    DegenerateDistribution,
    SingleClassInput,
    DimensionMismatch,
    DegenerateReport,
    InvalidArgument,
    TooFewPairs,
    MalformedCsv,
    EmptyFile,
    UnknownProperty,
    BadMagic,
    UnsupportedVersion,
    TruncatedFile,
    ShapeMismatch,
    MalformedMetadata,
    MalformedReport,
    IoError,
    AuthMissing,
    EndpointError,
    ParseError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::AllZeroDifferences: return "AllZeroDifferences";
        case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
        case ErrorCode::SingleClassInput: return "SingleClassInput";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::DegenerateReport: return "DegenerateReport";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::TooFewPairs: return "TooFewPairs";
        case ErrorCode::MalformedCsv: return "MalformedCsv";
        case ErrorCode::EmptyFile: return "EmptyFile";
        case ErrorCode::UnknownProperty: return "UnknownProperty";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::MalformedMetadata: return "MalformedMetadata";
        case ErrorCode::MalformedReport: return "MalformedReport";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::AuthMissing: return "AuthMissing";
        case ErrorCode::EndpointError: return "EndpointError";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Every failure surfaced by the library carries one of the codes above so the
/// CLI can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

}  // namespace ldsp
