#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bookforge/config.hpp"
#include "bookforge/forge.hpp"
#include "bookforge/gate.hpp"
#include "bookforge/layout.hpp"
#include "bookforge/narrative.hpp"
#include "bookforge/store.hpp"

namespace bookforge {

enum class RunState {
    Received,
    Extracting,
    Contextualizing,
    Describing,
    Generating,
    Scoring,
    AwaitingReview,
    Assembling,
    Ready,
    Failed,
};

std::string_view to_string(RunState state);
RunState run_state_from_string(std::string_view text);
/// Forward along the step order (awaiting_review may be skipped), or to
/// failed from any non-terminal state.
bool is_legal_run_transition(RunState from, RunState to);
bool is_terminal(RunState state);

/// Everything persisted about one book, rebuilt from the journal on start.
struct PipelineRun {
    std::string book_id;
    std::string title;
    std::string language;
    std::string body;
    std::int64_t created_at = 0;
    std::uint64_t sequence = 0;  // creation order in this data directory
    RunState state = RunState::Received;
    std::map<std::string, std::int64_t> step_timestamps;
    std::optional<std::string> error_code;
    std::optional<std::string> error;

    // Step results; a present value is never asked for again.
    std::optional<ExtractedEntities> entities;
    std::optional<HistoricalContext> historical_context;
    std::optional<std::vector<CharacterProfile>> characters;
    std::optional<std::vector<ObjectProfile>> objects;
    std::vector<AssetRecord> assets;
    ReviewBoard review;
    std::map<std::string, NarrationTrack> narration;  // keyed by "<start>-<end>"
    std::string bundle_ref;
    std::string bundle_sha256;
};

struct BookSummary {
    std::string book_id;
    std::string title;
    RunState state = RunState::Received;
    std::size_t model_count = 0;
    std::int64_t created_at = 0;
    std::optional<std::int64_t> eta_seconds;  // only before ready
    bool eta_provisional = false;
};

struct ReviewItem {
    std::string asset_id;
    std::string keyword;
    double score = 0.0;
    Verdict verdict = Verdict::Suspicious;
    DecidedBy decided_by = DecidedBy::System;
    std::string frontal_view_url;
};

struct BundleDownload {
    std::string bytes;
    std::string sha256;
};

struct ServiceOptions {
    std::filesystem::path data_dir;
    EtaModel eta = default_eta_model();
    /// Continue unfinished runs found in the journal.
    bool resume = true;
};

/// Runs books through the ten steps. Every state change and every paid
/// provider result is journaled before it takes effect, so a restarted
/// service continues where the last one stopped without repeating calls.
class PipelineService {
public:
    PipelineService(ProviderSet& providers, ServiceOptions options);
    ~PipelineService();

    PipelineService(const PipelineService&) = delete;
    PipelineService& operator=(const PipelineService&) = delete;

    /// Throws EmptyStory or InvalidArgument. The pipeline starts right away.
    BookSummary create_book(const std::string& title, const std::string& body, const std::string& language = "en");
    /// Runs the configured text recognizer over an image first. Throws Config
    /// when no recognizer is configured.
    BookSummary create_book_from_image(const std::string& title, std::string_view image,
                                       const std::string& language = "en");

    nlohmann::json status(const std::string& book_id) const;
    BookSummary summary(const std::string& book_id) const;
    /// Newest first.
    std::vector<BookSummary> list_books() const;

    std::vector<ReviewItem> review_items(const std::string& book_id) const;
    PlausibilityRecord post_verdict(const std::string& book_id, const std::string& asset_id, ReviewAction action);
    ReviewSummary complete_review(const std::string& book_id);

    BundleDownload download_bundle(const std::string& book_id) const;
    std::string frontal_view(const std::string& book_id, const std::string& asset_id) const;
    std::string manifest_json(const std::string& book_id) const;

    /// Blocks until the book is ready, failed or awaiting review, or until
    /// the timeout passes; returns the state seen last.
    RunState wait_until_settled(const std::string& book_id, std::chrono::milliseconds timeout) const;

    /// Stops workers at their next checkpoint and joins them.
    void shutdown();

    const BlobStore& blobs() const { return blobs_; }

private:
    struct Book;

    std::shared_ptr<Book> find_book(const std::string& book_id) const;
    void replay();
    void apply(const nlohmann::json& event);
    void record(const nlohmann::json& event);
    void transition(Book& book, RunState to, const std::string& code = {}, const std::string& message = {});
    void start_worker(const std::shared_ptr<Book>& book);
    void drive(const std::shared_ptr<Book>& book, std::stop_token stop);
    void run_narrative_steps(Book& book, RunState state);
    bool run_generation(Book& book, std::stop_token stop);
    /// False when the book now waits for review.
    bool run_scoring(Book& book);
    void run_assembly(Book& book);
    BookSummary summarize(const Book& book) const;

    ProviderSet& providers_;
    ServiceOptions options_;
    BlobStore blobs_;
    Journal journal_;

    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::map<std::string, std::shared_ptr<Book>> books_;
    std::uint64_t next_sequence_ = 1;

    std::stop_source stop_;
    std::mutex workers_mutex_;
    std::list<std::jthread> workers_;
    bool shut_down_ = false;
};

nlohmann::json to_json(const BookSummary& summary);
nlohmann::json to_json(const ReviewItem& item);
nlohmann::json to_json(const PlausibilityRecord& record);
PlausibilityRecord plausibility_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NarrationTrack& track);
NarrationTrack narration_track_from_json(const nlohmann::json& j);

/// Deterministic id: a digest of title, language and body plus a counter
/// that tells resubmissions apart.
std::string make_book_id(std::string_view title, std::string_view body, std::string_view language,
                         std::uint64_t ordinal);

}  // namespace bookforge
