#include "bookforge/error.hpp"

namespace bookforge {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyStory: return "EmptyStory";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::MalformedOutput: return "MalformedOutput";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::IncompleteProfile: return "IncompleteProfile";
        case ErrorCode::GenerationTimeout: return "GenerationTimeout";
        case ErrorCode::ProviderRejectedPrompt: return "ProviderRejectedPrompt";
        case ErrorCode::ScorerUnavailable: return "ScorerUnavailable";
        case ErrorCode::UnreadableImage: return "UnreadableImage";
        case ErrorCode::UnknownAsset: return "UnknownAsset";
        case ErrorCode::VerdictConflict: return "VerdictConflict";
        case ErrorCode::IllegalTransition: return "IllegalTransition";
        case ErrorCode::EmptyBook: return "EmptyBook";
        case ErrorCode::TtsUnavailable: return "TtsUnavailable";
        case ErrorCode::ZeroDurationAudio: return "ZeroDurationAudio";
        case ErrorCode::DanglingReference: return "DanglingReference";
        case ErrorCode::RemovedAssetReferenced: return "RemovedAssetReferenced";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::WrongState: return "WrongState";
        case ErrorCode::Io: return "Io";
        case ErrorCode::Config: return "Config";
    }
    return "Unknown";
}

}  // namespace bookforge
