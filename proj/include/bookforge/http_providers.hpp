#pragma once

#include <chrono>
#include <string>

#include "bookforge/providers.hpp"

namespace bookforge {

struct Endpoint {
    std::string url;  // http://host:port/path
    std::string token;
    std::chrono::seconds timeout{30};
};

/// POST {step, instruction, story, context} -> {"text": reply}
class HttpLanguageModel final : public LanguageModel {
public:
    explicit HttpLanguageModel(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string complete(const LanguageModelRequest& request) override;

private:
    Endpoint endpoint_;
};

/// POST <base>/jobs {prompt} -> {job_id};
/// GET <base>/jobs/<id> -> {status, mesh_url?, frontal_view_url?, message?}
/// with status one of queued|running|succeeded|failed|rejected. Artifact URLs
/// may be absolute or relative to the base.
class HttpMeshGenerator final : public MeshGenerator {
public:
    explicit HttpMeshGenerator(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string submit(const std::string& prompt) override;
    JobPoll poll(const std::string& job_id) override;

private:
    Endpoint endpoint_;
};

/// POST {image_base64, text} -> {"similarity": cosine in [-1, 1]}; mapped to
/// [0, 1] as (x + 1) / 2.
class HttpSimilarityScorer final : public SimilarityScorer {
public:
    explicit HttpSimilarityScorer(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
    double score(std::string_view png, const std::string& text) override;

private:
    Endpoint endpoint_;
};

/// Raw cosine similarity to the gate's [0, 1] scale.
double normalize_cosine(double cosine);

/// POST {text, language} -> WAV bytes.
class HttpSpeechSynthesizer final : public SpeechSynthesizer {
public:
    explicit HttpSpeechSynthesizer(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string synthesize(const std::string& text, const std::string& language) override;

private:
    Endpoint endpoint_;
};

/// POST image bytes -> {"text": ...}
class HttpTextRecognizer final : public TextRecognizer {
public:
    explicit HttpTextRecognizer(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string recognize(std::string_view image) override;

private:
    Endpoint endpoint_;
};

std::string base64_encode(std::string_view bytes);

}  // namespace bookforge
