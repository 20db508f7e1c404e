#include "bookforge/gate.hpp"

#include "bookforge/error.hpp"
#include "bookforge/forge.hpp"
#include "bookforge/media.hpp"
#include "bookforge/providers.hpp"
#include "bookforge/store.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bookforge {

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::AutoPlausible: return "auto_plausible";
        case Verdict::Suspicious: return "suspicious";
        case Verdict::Kept: return "kept";
        case Verdict::Removed: return "removed";
    }
    return "suspicious";
}

std::string_view to_string(DecidedBy who) { return who == DecidedBy::Human ? "human" : "system"; }

std::string_view to_string(ReviewAction action) { return action == ReviewAction::Keep ? "keep" : "remove"; }

Verdict verdict_from_string(std::string_view text) {
    for (auto v : {Verdict::AutoPlausible, Verdict::Suspicious, Verdict::Kept, Verdict::Removed}) {
        if (to_string(v) == text) return v;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown verdict '" + std::string(text) + "'");
}

ReviewAction review_action_from_string(std::string_view text) {
    if (text == "keep") return ReviewAction::Keep;
    if (text == "remove") return ReviewAction::Remove;
    throw Error(ErrorCode::InvalidArgument, "verdict must be 'keep' or 'remove', got '" + std::string(text) + "'");
}

void GateConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw Error(ErrorCode::Config, "gate threshold must lie strictly between 0 and 1");
    }
    if (default_verdict_on_complete != Verdict::Removed && default_verdict_on_complete != Verdict::Kept) {
        throw Error(ErrorCode::Config, "completion default must be kept or removed");
    }
}

Verdict classify(double score, const GateConfig& config) {
    if (!(score >= 0.0 && score <= 1.0)) throw Error(ErrorCode::InvalidArgument, "score must lie in [0, 1]");
    return score < config.threshold ? Verdict::Suspicious : Verdict::AutoPlausible;
}

double score_asset(const AssetRecord& asset, SimilarityScorer& scorer, const BlobStore& blobs) {
    if (asset.status != AssetStatus::Generated) {
        throw Error(ErrorCode::IllegalTransition, "asset " + asset.asset_id + " is not in generated status");
    }
    std::string image;
    try {
        image = blobs.get(asset.frontal_view_ref);
    } catch (const Error&) {
        throw Error(ErrorCode::UnreadableImage, "frontal view of " + asset.asset_id + " is missing");
    }
    if (!is_png(image)) throw Error(ErrorCode::UnreadableImage, "frontal view of " + asset.asset_id + " is not a PNG");
    const double score = scorer.score(image, asset.keyword);
    if (!(score >= 0.0 && score <= 1.0)) {
        throw Error(ErrorCode::ScorerUnavailable, "scorer returned " + std::to_string(score) + " outside [0, 1]");
    }
    return score;
}

ReviewBoard::ReviewBoard(const ReviewBoard& other) {
    std::lock_guard lock(other.mutex_);
    config_ = other.config_;
    records_ = other.records_;
    completed_ = other.completed_;
}

ReviewBoard& ReviewBoard::operator=(const ReviewBoard& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_, other.mutex_);
    config_ = other.config_;
    records_ = other.records_;
    completed_ = other.completed_;
    return *this;
}

const PlausibilityRecord& ReviewBoard::record_score(std::string asset_id, std::string keyword, double score,
                                                    std::int64_t now) {
    PlausibilityRecord record{asset_id, std::move(keyword), score, classify(score, config_), DecidedBy::System, now};
    std::lock_guard lock(mutex_);
    auto [it, inserted] = records_.insert_or_assign(std::move(asset_id), std::move(record));
    return it->second;
}

void ReviewBoard::restore(PlausibilityRecord record) {
    std::lock_guard lock(mutex_);
    records_.insert_or_assign(record.asset_id, std::move(record));
}

void ReviewBoard::restore_completed(bool completed) {
    std::lock_guard lock(mutex_);
    completed_ = completed;
}

std::vector<PlausibilityRecord> ReviewBoard::review_queue() const {
    std::lock_guard lock(mutex_);
    std::vector<PlausibilityRecord> out;
    for (const auto& [id, record] : records_) {
        if (record.verdict != Verdict::AutoPlausible) out.push_back(record);
    }
    return out;
}

PlausibilityRecord ReviewBoard::apply_verdict(const std::string& asset_id, ReviewAction action, DecidedBy actor,
                                              std::int64_t now) {
    std::lock_guard lock(mutex_);
    auto it = records_.find(asset_id);
    if (it == records_.end()) throw Error(ErrorCode::UnknownAsset, "no scored asset " + asset_id);
    auto& record = it->second;
    const Verdict wanted = action == ReviewAction::Keep ? Verdict::Kept : Verdict::Removed;
    if (record.verdict == wanted) return record;
    if (record.verdict != Verdict::Suspicious) {
        throw Error(ErrorCode::VerdictConflict, "asset " + asset_id + " is already " + std::string(to_string(record.verdict)));
    }
    record.verdict = wanted;
    record.decided_by = actor;
    record.decided_at = now;
    return record;
}

ReviewSummary ReviewBoard::summarize_locked() const {
    ReviewSummary summary;
    for (const auto& [id, record] : records_) {
        switch (record.verdict) {
            case Verdict::AutoPlausible: ++summary.auto_plausible; break;
            case Verdict::Kept: ++summary.kept; break;
            case Verdict::Removed: ++summary.removed; break;
            case Verdict::Suspicious: break;
        }
    }
    summary.completed = completed_;
    return summary;
}

ReviewSummary ReviewBoard::complete_review(std::int64_t now) {
    std::lock_guard lock(mutex_);
    std::size_t defaulted = 0;
    if (!completed_) {
        for (auto& [id, record] : records_) {
            if (record.verdict != Verdict::Suspicious) continue;
            record.verdict = config_.default_verdict_on_complete;
            record.decided_by = DecidedBy::System;
            record.decided_at = now;
            ++defaulted;
        }
        completed_ = true;
    }
    ReviewSummary summary = summarize_locked();
    summary.newly_defaulted = defaulted;
    return summary;
}

std::optional<PlausibilityRecord> ReviewBoard::find(const std::string& asset_id) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find(asset_id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

std::vector<PlausibilityRecord> ReviewBoard::records() const {
    std::lock_guard lock(mutex_);
    std::vector<PlausibilityRecord> out;
    for (const auto& [id, record] : records_) out.push_back(record);
    return out;
}

std::size_t ReviewBoard::suspicious_count() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [](const auto& entry) {
        return entry.second.verdict == Verdict::Suspicious;
    }));
}

bool ReviewBoard::completed() const {
    std::lock_guard lock(mutex_);
    return completed_;
}

bool ReviewBoard::usable(const std::string& asset_id) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find(asset_id);
    return it != records_.end() &&
           (it->second.verdict == Verdict::AutoPlausible || it->second.verdict == Verdict::Kept);
}

std::vector<ThresholdRow> evaluate_thresholds(const std::vector<LabeledPair>& pairs,
                                              const std::vector<double>& thresholds) {
    if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "no labeled pairs to evaluate");
    if (!std::is_sorted(thresholds.begin(), thresholds.end(), std::greater<>())) {
        throw Error(ErrorCode::InvalidArgument, "thresholds must be sorted in descending order");
    }
    // Pairs by descending score with a running count of plausible labels.
    std::vector<const LabeledPair*> ranked;
    ranked.reserve(pairs.size());
    for (const auto& pair : pairs) {
        if (!(pair.score >= 0.0 && pair.score <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "score for '" + pair.keyword + "' lies outside [0, 1]");
        }
        ranked.push_back(&pair);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](auto* a, auto* b) { return a->score > b->score; });

    std::vector<ThresholdRow> rows;
    std::size_t taken = 0;
    std::size_t plausible = 0;
    for (double c : thresholds) {
        while (taken < ranked.size() && ranked[taken]->score > c) {
            plausible += ranked[taken]->plausible ? 1 : 0;
            ++taken;
        }
        ThresholdRow row{c, std::nullopt, taken, plausible};
        if (taken > 0) row.proportion_plausible = static_cast<double>(plausible) / static_cast<double>(taken);
        rows.push_back(row);
    }
    return rows;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch != '\r') {
            field += ch;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string trimmed(std::string s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

}  // namespace

std::vector<LabeledPair> parse_labeled_pairs(std::string_view csv) {
    std::vector<LabeledPair> pairs;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trimmed(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 3) {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_number) + ": expected keyword,score,label");
        }
        const std::string label = trimmed(fields[2]);
        if (pairs.empty() && line_number == 1 && label == "label") continue;
        LabeledPair pair;
        pair.keyword = trimmed(fields[0]);
        try {
            std::size_t used = 0;
            const std::string score = trimmed(fields[1]);
            pair.score = std::stod(score, &used);
            if (used != score.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_number) + ": bad score '" + fields[1] + "'");
        }
        if (!(pair.score >= 0.0 && pair.score <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_number) + ": score outside [0, 1]");
        }
        if (label == "plausible") {
            pair.plausible = true;
        } else if (label != "implausible") {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_number) + ": label must be plausible or implausible");
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

}  // namespace bookforge
