#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bookforge {

enum class ErrorCode {
    EmptyStory,
    InvalidArgument,
    ProviderUnavailable,
    MalformedOutput,
    SchemaViolation,
    IncompleteProfile,
    GenerationTimeout,
    ProviderRejectedPrompt,
    ScorerUnavailable,
    UnreadableImage,
    UnknownAsset,
    VerdictConflict,
    IllegalTransition,
    EmptyBook,
    TtsUnavailable,
    ZeroDurationAudio,
    DanglingReference,
    RemovedAssetReferenced,
    NotFound,
    WrongState,
    Io,
    Config,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace bookforge
