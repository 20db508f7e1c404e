#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bookforge {

class SimilarityScorer;
struct AssetRecord;
class BlobStore;

enum class Verdict { AutoPlausible, Suspicious, Kept, Removed };
enum class DecidedBy { System, Human };
enum class ReviewAction { Keep, Remove };

std::string_view to_string(Verdict verdict);
std::string_view to_string(DecidedBy who);
std::string_view to_string(ReviewAction action);
Verdict verdict_from_string(std::string_view text);
ReviewAction review_action_from_string(std::string_view text);

struct GateConfig {
    double threshold = 0.7;
    std::chrono::seconds review_timeout{24 * 60 * 60};
    Verdict default_verdict_on_complete = Verdict::Removed;

    void validate() const;
};

struct PlausibilityRecord {
    std::string asset_id;
    std::string keyword_text;
    double score = 0.0;
    Verdict verdict = Verdict::Suspicious;
    DecidedBy decided_by = DecidedBy::System;
    std::int64_t decided_at = 0;  // unix seconds

    bool operator==(const PlausibilityRecord&) const = default;
};

/// Suspicious iff score < threshold. A score equal to the threshold passes.
Verdict classify(double score, const GateConfig& config);

/// Scores the asset's frontal view against its keyword. The asset must be in
/// `generated` status; the returned score is checked to lie in [0, 1].
double score_asset(const AssetRecord& asset, SimilarityScorer& scorer, const BlobStore& blobs);

struct ReviewSummary {
    std::size_t auto_plausible = 0;
    std::size_t kept = 0;
    std::size_t removed = 0;
    std::size_t newly_defaulted = 0;
    bool completed = false;
};

/// Review state of one book. Verdict changes are serialized; completion is a
/// single exclusive step.
class ReviewBoard {
public:
    explicit ReviewBoard(GateConfig config = {}) : config_(config) { config_.validate(); }

    ReviewBoard(const ReviewBoard& other);
    ReviewBoard& operator=(const ReviewBoard& other);

    const GateConfig& config() const { return config_; }

    /// Classifies a fresh score and stores the record.
    const PlausibilityRecord& record_score(std::string asset_id, std::string keyword, double score,
                                           std::int64_t now);
    /// Reinstates a persisted record as-is.
    void restore(PlausibilityRecord record);
    void restore_completed(bool completed);

    std::vector<PlausibilityRecord> review_queue() const;
    PlausibilityRecord apply_verdict(const std::string& asset_id, ReviewAction action, DecidedBy actor,
                                     std::int64_t now);
    ReviewSummary complete_review(std::int64_t now);

    std::optional<PlausibilityRecord> find(const std::string& asset_id) const;
    std::vector<PlausibilityRecord> records() const;
    std::size_t suspicious_count() const;
    bool completed() const;
    /// Asset is usable in the book: auto-plausible or kept.
    bool usable(const std::string& asset_id) const;

private:
    ReviewSummary summarize_locked() const;

    GateConfig config_;
    mutable std::mutex mutex_;
    std::map<std::string, PlausibilityRecord> records_;
    bool completed_ = false;
};

struct LabeledPair {
    std::string keyword;
    double score = 0.0;
    bool plausible = false;
};

struct ThresholdRow {
    double threshold = 0.0;
    std::optional<double> proportion_plausible;  // over pairs with score > threshold
    std::size_t count = 0;
    std::size_t plausible = 0;
};

/// For each threshold c: share of plausible pairs among pairs with score > c.
/// An empty selection reports no proportion and count 0.
std::vector<ThresholdRow> evaluate_thresholds(const std::vector<LabeledPair>& pairs,
                                              const std::vector<double>& thresholds);

/// Reads `keyword,score,label` rows (label plausible|implausible). A header
/// row is skipped; keywords may be double-quoted.
std::vector<LabeledPair> parse_labeled_pairs(std::string_view csv);

}  // namespace bookforge
