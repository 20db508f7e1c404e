#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bookforge/providers.hpp"
#include "bookforge/rational.hpp"

namespace bookforge {

/// Appends one line per paid provider call, shared across processes.
class CallLog {
public:
    explicit CallLog(std::filesystem::path file = {}) : file_(std::move(file)) {}
    void record(const std::string& line);
    std::vector<std::string> lines() const;
    bool enabled() const { return !file_.empty(); }

private:
    std::filesystem::path file_;
    mutable std::mutex mutex_;
};

/// Replies to each step with fixed text. A queue of scripted failures can be
/// placed in front of any step.
class ScriptedLanguageModel final : public LanguageModel {
public:
    enum class Fault { Unavailable, Malformed };

    ScriptedLanguageModel() = default;
    /// Fixture: {"step1": <reply>, ..., "step4": <reply>}; objects are serialized.
    static std::unique_ptr<ScriptedLanguageModel> from_fixture(const nlohmann::json& fixture, CallLog* log = nullptr);

    void set_reply(int step, std::string reply);
    void push_fault(int step, Fault fault, int times = 1);
    void set_down(bool down) { down_ = down; }

    std::string complete(const LanguageModelRequest& request) override;

    int calls(int step) const;
    std::vector<LanguageModelRequest> requests() const;

private:
    mutable std::mutex mutex_;
    std::map<int, std::string> replies_;
    std::map<int, std::deque<Fault>> faults_;
    std::map<int, int> calls_;
    std::vector<LanguageModelRequest> requests_;
    std::atomic<bool> down_{false};
    CallLog* log_ = nullptr;
};

/// Returns a box mesh whose proportions derive from the prompt. Jobs finish
/// `latency` after submission; job ids carry the submission time, so a fresh
/// instance can poll a job an earlier instance submitted.
class MockMeshGenerator final : public MeshGenerator {
public:
    struct Options {
        std::chrono::milliseconds latency{0};
        bool provide_frontal = false;
        std::vector<std::string> never_finish;  // prompts starting with these stay running
        std::vector<std::string> reject;        // prompts starting with these are rejected
        bool down = false;
    };

    MockMeshGenerator() = default;
    explicit MockMeshGenerator(Options options, CallLog* log = nullptr) : options_(std::move(options)), log_(log) {}

    std::string submit(const std::string& prompt) override;
    JobPoll poll(const std::string& job_id) override;

    int submissions() const { return submissions_; }
    int max_in_flight() const { return max_in_flight_; }
    int in_flight() const { return in_flight_; }

private:
    Options options_;
    CallLog* log_ = nullptr;
    std::mutex mutex_;
    std::map<std::string, std::string> prompts_;  // job id -> prompt
    std::map<std::string, bool> finished_;
    std::atomic<int> submissions_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
};

/// Scores from a keyword table (case-insensitive), or by (keyword, image
/// sha256) when scripted that way; everything else gets the default score.
class MockSimilarityScorer final : public SimilarityScorer {
public:
    explicit MockSimilarityScorer(double default_score = 0.9, CallLog* log = nullptr)
        : default_score_(default_score), log_(log) {}

    void set_score(const std::string& keyword, double score);
    void set_score_for_image(const std::string& keyword, const std::string& image_sha256, double score);
    void set_down(bool down) { down_ = down; }

    double score(std::string_view png, const std::string& text) override;
    int calls() const { return calls_; }

private:
    double default_score_;
    CallLog* log_;
    std::mutex mutex_;
    std::map<std::string, double> by_keyword_;
    std::map<std::pair<std::string, std::string>, double> by_image_;
    std::atomic<int> calls_{0};
    std::atomic<bool> down_{false};
};

/// Silent WAV lasting `seconds_per_word` per word of input.
class MockSpeechSynthesizer final : public SpeechSynthesizer {
public:
    explicit MockSpeechSynthesizer(Rational seconds_per_word = Rational::of(1, 2), CallLog* log = nullptr)
        : seconds_per_word_(seconds_per_word), log_(log) {}

    /// Every reply lasts exactly this long regardless of the text.
    void set_fixed_duration(std::optional<Rational> seconds) { fixed_ = seconds; }
    void set_down(bool down) { down_ = down; }

    std::string synthesize(const std::string& text, const std::string& language) override;
    int calls() const { return calls_; }

private:
    Rational seconds_per_word_;
    CallLog* log_;
    std::optional<Rational> fixed_;
    std::atomic<int> calls_{0};
    std::atomic<bool> down_{false};
};

}  // namespace bookforge
