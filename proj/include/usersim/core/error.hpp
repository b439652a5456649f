#pragma once

#include <stdexcept>
#include <string>

namespace usersim {

enum class ErrorCode {
    InvalidInput,
    CatalogInvalid,
    DuplicateId,
    RemoteUnavailable,
    MalformedResponse,
    PoolExhausted,
    PreconditionViolation,
    ProfileGenerationFailed,
    ChatFailed,
    InterviewFailed,
    LoadFailed,
    DegenerateFit,
    InvalidPatch,
    ConfigInvalid,
};

const char* to_string(ErrorCode code);

// Every failure the simulator reports carries one of the codes above so callers
// (engine degradation, server 4xx mapping) can branch without string matching.
class SimError : public std::runtime_error {
public:
    SimError(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::CatalogInvalid: return "CatalogInvalid";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::RemoteUnavailable: return "RemoteUnavailable";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::PoolExhausted: return "PoolExhausted";
        case ErrorCode::PreconditionViolation: return "PreconditionViolation";
        case ErrorCode::ProfileGenerationFailed: return "ProfileGenerationFailed";
        case ErrorCode::ChatFailed: return "ChatFailed";
        case ErrorCode::InterviewFailed: return "InterviewFailed";
        case ErrorCode::LoadFailed: return "LoadFailed";
        case ErrorCode::DegenerateFit: return "DegenerateFit";
        case ErrorCode::InvalidPatch: return "InvalidPatch";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

}  // namespace usersim
