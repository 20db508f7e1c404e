#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace bookforge {

// Contracts for the external services. Implementations signal failures with
// bookforge::Error using the codes named on each method.

struct LanguageModelRequest {
    int step = 1;  // pipeline step 1-4
    std::string instruction;
    std::string story;
    std::string context;  // JSON object text
};

class LanguageModel {
public:
    virtual ~LanguageModel() = default;
    /// Raw reply text. Throws ProviderUnavailable.
    virtual std::string complete(const LanguageModelRequest& request) = 0;
};

enum class JobState { Queued, Running, Succeeded, Failed, Rejected };

struct JobPoll {
    JobState state = JobState::Queued;
    std::string mesh_glb;                    // set when Succeeded
    std::optional<std::string> frontal_png;  // may be absent; the forge renders one
    std::string message;
};

class MeshGenerator {
public:
    virtual ~MeshGenerator() = default;
    /// Returns a job id. Throws ProviderUnavailable or ProviderRejectedPrompt.
    virtual std::string submit(const std::string& prompt) = 0;
    /// Throws ProviderUnavailable.
    virtual JobPoll poll(const std::string& job_id) = 0;
};

class SimilarityScorer {
public:
    virtual ~SimilarityScorer() = default;
    /// Similarity of image and text in [0, 1]. Throws ScorerUnavailable.
    virtual double score(std::string_view png, const std::string& text) = 0;
};

class SpeechSynthesizer {
public:
    virtual ~SpeechSynthesizer() = default;
    /// WAV bytes. Throws TtsUnavailable.
    virtual std::string synthesize(const std::string& text, const std::string& language) = 0;
};

/// Optional photo ingestion hook; disabled unless configured.
class TextRecognizer {
public:
    virtual ~TextRecognizer() = default;
    virtual std::string recognize(std::string_view image) = 0;
};

}  // namespace bookforge
