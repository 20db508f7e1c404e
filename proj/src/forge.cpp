#include "bookforge/forge.hpp"

#include "bookforge/error.hpp"
#include "bookforge/media.hpp"
#include "bookforge/store.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace bookforge {

using nlohmann::json;

std::int64_t unix_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string_view to_string(PromptSource source) {
    switch (source) {
        case PromptSource::EntityName: return "entity_name";
        case PromptSource::HistoricalContext: return "historical_context";
        case PromptSource::CharacterDescription: return "character_description";
        case PromptSource::ObjectDescription: return "object_description";
    }
    return "entity_name";
}

namespace {

PromptSource prompt_source_from_string(std::string_view text) {
    for (auto s : {PromptSource::EntityName, PromptSource::HistoricalContext, PromptSource::CharacterDescription,
                   PromptSource::ObjectDescription}) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown prompt source '" + std::string(text) + "'");
}

void require_present(const std::string& value, const std::string& what, const std::string& name) {
    if (value.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error(ErrorCode::IncompleteProfile, what + " missing for '" + name + "'");
    }
}

}  // namespace

GenerationPrompt build_generation_prompt(const CharacterProfile& profile) {
    require_present(profile.name, "name", profile.name);
    for (const auto* attribute : {&profile.gender, &profile.nationality, &profile.age, &profile.appearance_features,
                                  &profile.clothing, &profile.era_of_life}) {
        require_present(*attribute, "description attribute", profile.name);
    }
    return {profile.name, EntityKind::Character, profile.name + ". " + profile.description() + ".",
            {PromptSource::EntityName, PromptSource::CharacterDescription}};
}

GenerationPrompt build_generation_prompt(const ObjectProfile& profile, const HistoricalContext& context) {
    require_present(profile.name, "name", profile.name);
    require_present(profile.context_description, "context description", profile.name);
    require_present(context.era, "historical era", profile.name);
    require_present(context.place, "historical place", profile.name);
    std::string text = profile.name + ". Setting: " + context.era + ", " + context.place + ".";
    if (!context.cultural_notes.empty()) text += " " + context.cultural_notes;
    if (text.back() != '.') text += '.';
    text += " " + profile.context_description;
    return {profile.name, EntityKind::Object, std::move(text),
            {PromptSource::EntityName, PromptSource::HistoricalContext, PromptSource::ObjectDescription}};
}

std::string_view to_string(AssetStatus status) {
    switch (status) {
        case AssetStatus::Pending: return "pending";
        case AssetStatus::Generating: return "generating";
        case AssetStatus::Generated: return "generated";
        case AssetStatus::Scored: return "scored";
        case AssetStatus::Kept: return "kept";
        case AssetStatus::Removed: return "removed";
        case AssetStatus::Failed: return "failed";
    }
    return "pending";
}

AssetStatus asset_status_from_string(std::string_view text) {
    for (auto s : {AssetStatus::Pending, AssetStatus::Generating, AssetStatus::Generated, AssetStatus::Scored,
                   AssetStatus::Kept, AssetStatus::Removed, AssetStatus::Failed}) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown asset status '" + std::string(text) + "'");
}

bool is_legal_transition(AssetStatus from, AssetStatus to) {
    using S = AssetStatus;
    switch (from) {
        case S::Pending: return to == S::Generating || to == S::Failed;
        case S::Generating: return to == S::Generated || to == S::Failed;
        case S::Generated: return to == S::Scored;
        case S::Scored: return to == S::Kept || to == S::Removed;
        case S::Kept:
        case S::Removed:
        case S::Failed: return false;
    }
    return false;
}

void AssetRecord::transition(AssetStatus to, std::int64_t now) {
    if (!is_legal_transition(status, to)) {
        throw Error(ErrorCode::IllegalTransition, "asset " + asset_id + ": " + std::string(to_string(status)) +
                                                      " -> " + std::string(to_string(to)));
    }
    status = to;
    updated_at = now;
}

json to_json(const GenerationPrompt& prompt) {
    json parts = json::array();
    for (auto p : prompt.source_parts) parts.push_back(to_string(p));
    return {{"keyword", prompt.keyword}, {"kind", to_string(prompt.kind)}, {"prompt_text", prompt.prompt_text},
            {"source_parts", parts}};
}

json to_json(const AssetRecord& r) {
    return {{"asset_id", r.asset_id},     {"keyword", r.keyword},       {"prompt", to_json(r.prompt)},
            {"job_id", r.job_id},         {"mesh_ref", r.mesh_ref},     {"frontal_view_ref", r.frontal_view_ref},
            {"status", to_string(r.status)}, {"error", r.error},        {"created_at", r.created_at},
            {"updated_at", r.updated_at}};
}

AssetRecord asset_record_from_json(const json& j) {
    AssetRecord r;
    r.asset_id = j.at("asset_id").get<std::string>();
    r.keyword = j.at("keyword").get<std::string>();
    const auto& p = j.at("prompt");
    r.prompt.keyword = p.at("keyword").get<std::string>();
    r.prompt.kind = entity_kind_from_string(p.at("kind").get<std::string>());
    r.prompt.prompt_text = p.at("prompt_text").get<std::string>();
    for (const auto& part : p.at("source_parts")) r.prompt.source_parts.push_back(prompt_source_from_string(part.get<std::string>()));
    r.job_id = j.at("job_id").get<std::string>();
    r.mesh_ref = j.at("mesh_ref").get<std::string>();
    r.frontal_view_ref = j.at("frontal_view_ref").get<std::string>();
    r.status = asset_status_from_string(j.at("status").get<std::string>());
    r.error = j.at("error").get<std::string>();
    r.created_at = j.at("created_at").get<std::int64_t>();
    r.updated_at = j.at("updated_at").get<std::int64_t>();
    return r;
}

std::string make_asset_id(std::string_view book_id, EntityKind kind, std::string_view keyword) {
    std::string key(book_id);
    key += '\0';
    key += to_string(kind);
    key += '\0';
    key += case_fold(keyword);
    return "a" + sha256_hex(key).substr(0, 15);
}

std::span<const GenerationTimeSample> generation_time_table() {
    static const std::array<GenerationTimeSample, 11> kTable{{
        {"Egre", 361, 86, 6},
        {"Returning the Jade to Kingdom Zhao", 805, 111, 6},
        {"Bird Paradise", 1015, 119, 7},
        {"Watching the Tide", 473, 108, 6},
        {"John Hawkwood", 24, 164, 9},
        {"Bully Bill", 1348, 174, 13},
        {"Captain Fantastic", 889, 135, 9},
        {"Learning About No", 610, 130, 8},
        {"Mrs.Richards", 252, 143, 8},
        {"The Giraffe", 1346, 163, 9},
        {"Borrowing Arrows with Thatched Boats", 1362, 202, 15},
    }};
    return kTable;
}

EtaModel fit_eta(std::span<const GenerationTimeSample> samples) {
    double sw = 0, swm = 0, swmm = 0, sws = 0, swms = 0;
    for (const auto& s : samples) {
        if (s.seconds <= 0) throw Error(ErrorCode::InvalidArgument, "sample times must be positive");
        const double w = 1.0 / (static_cast<double>(s.seconds) * s.seconds);
        const double m = s.model_count;
        sw += w;
        swm += w * m;
        swmm += w * m * m;
        sws += w * s.seconds;
        swms += w * m * s.seconds;
    }
    const double det = sw * swmm - swm * swm;
    if (samples.size() < 2 || std::fabs(det) < 1e-18) {
        throw Error(ErrorCode::InvalidArgument, "need samples with at least two distinct model counts");
    }
    return {(sws * swmm - swm * swms) / det, (sw * swms - swm * sws) / det};
}

EtaModel default_eta_model() { return {31.588529768341623, 12.115286708443634}; }

std::int64_t estimate_generation_seconds(int model_count, const EtaModel& eta) {
    if (model_count < 1) throw Error(ErrorCode::InvalidArgument, "model count must be at least 1");
    if (eta.base_seconds < 0 || eta.per_model_seconds < 0) {
        throw Error(ErrorCode::InvalidArgument, "ETA coefficients must be non-negative");
    }
    return std::llround(eta.base_seconds + eta.per_model_seconds * model_count);
}

int provisional_model_count(std::size_t word_count) {
    return static_cast<int>(std::clamp<std::size_t>(4 + word_count / 250, 4, 15));
}

AssetForge::AssetForge(MeshGenerator& generator, BlobStore& blobs, ForgeConfig config)
    : generator_(generator), blobs_(blobs), config_(config) {
    if (config_.parallelism == 0) throw Error(ErrorCode::Config, "generation parallelism must be positive");
}

void AssetForge::submit_generation(AssetRecord& record, std::int64_t now) {
    if (record.status != AssetStatus::Pending) {
        throw Error(ErrorCode::IllegalTransition, "asset " + record.asset_id + " is not pending");
    }
    record.job_id = generator_.submit(record.prompt.prompt_text);
    record.transition(AssetStatus::Generating, now);
}

bool AssetForge::poll_generation(AssetRecord& record, std::int64_t now) {
    if (record.status != AssetStatus::Generating) {
        throw Error(ErrorCode::IllegalTransition, "asset " + record.asset_id + " is not generating");
    }
    JobPoll poll = generator_.poll(record.job_id);
    switch (poll.state) {
        case JobState::Queued:
        case JobState::Running: return false;
        case JobState::Failed:
        case JobState::Rejected:
            record.error = std::string(to_string(poll.state == JobState::Rejected ? ErrorCode::ProviderRejectedPrompt
                                                                                  : ErrorCode::ProviderUnavailable)) +
                           ": " + poll.message;
            record.transition(AssetStatus::Failed, now);
            return true;
        case JobState::Succeeded: break;
    }
    const Mesh mesh = parse_glb(poll.mesh_glb);
    std::string frontal = poll.frontal_png && is_png(*poll.frontal_png) ? *poll.frontal_png : render_frontal_view(mesh);
    record.mesh_ref = blobs_.put(poll.mesh_glb, "glb");
    record.frontal_view_ref = blobs_.put(frontal, "png");
    record.transition(AssetStatus::Generated, now);
    return true;
}

void AssetForge::run_to_completion(AssetRecord& record, const Observer& observer, std::stop_token stop) {
    auto notify = [&] {
        if (observer) observer(record);
    };
    auto fail = [&](ErrorCode code, const std::string& message) {
        record.error = std::string(to_string(code)) + ": " + message;
        record.transition(AssetStatus::Failed, unix_now());
        notify();
    };

    if (record.status == AssetStatus::Pending) {
        try {
            submit_generation(record, unix_now());
        } catch (const Error& e) {
            fail(e.code(), e.what());
            return;
        }
        notify();
    }
    if (record.status != AssetStatus::Generating) return;

    const auto deadline = Clock::now() + config_.generation_timeout;
    while (!stop.stop_requested()) {
        try {
            if (poll_generation(record, unix_now())) {
                notify();
                return;
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ProviderUnavailable) {
                fail(e.code(), e.what());
                return;
            }
        }
        if (Clock::now() >= deadline) {
            fail(ErrorCode::GenerationTimeout, "no result for job " + record.job_id + " within " +
                                                   std::to_string(config_.generation_timeout.count()) + " ms");
            return;
        }
        std::this_thread::sleep_for(std::min<Clock::duration>(config_.poll_interval, deadline - Clock::now()));
    }
}

void AssetForge::generate_all(std::vector<AssetRecord>& records, const Observer& observer, std::stop_token stop) {
    std::mutex observer_mutex;
    const Observer serialized = [&](const AssetRecord& r) {
        if (!observer) return;
        std::lock_guard lock(observer_mutex);
        observer(r);
    };
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            if (stop.stop_requested()) return;
            auto& record = records[i];
            if (record.status != AssetStatus::Pending && record.status != AssetStatus::Generating) continue;
            try {
                run_to_completion(record, serialized, stop);
            } catch (const std::exception& e) {
                record.error = e.what();
                record.status = AssetStatus::Failed;
                record.updated_at = unix_now();
                serialized(record);
            }
        }
    };
    const std::size_t workers = std::min(config_.parallelism, records.size());
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
}

}  // namespace bookforge
