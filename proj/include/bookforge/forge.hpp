#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bookforge/ingest.hpp"
#include "bookforge/narrative.hpp"
#include "bookforge/providers.hpp"

namespace bookforge {

class BlobStore;

/// Which step output a prompt fragment came from.
enum class PromptSource { EntityName, HistoricalContext, CharacterDescription, ObjectDescription };

std::string_view to_string(PromptSource source);

struct GenerationPrompt {
    std::string keyword;
    EntityKind kind = EntityKind::Object;
    std::string prompt_text;
    std::vector<PromptSource> source_parts;

    bool operator==(const GenerationPrompt&) const = default;
};

/// Character prompt: name, then the six-attribute description.
GenerationPrompt build_generation_prompt(const CharacterProfile& profile);
/// Object prompt: name, historical setting, then the in-story description.
GenerationPrompt build_generation_prompt(const ObjectProfile& profile, const HistoricalContext& context);

enum class AssetStatus { Pending, Generating, Generated, Scored, Kept, Removed, Failed };

std::string_view to_string(AssetStatus status);
AssetStatus asset_status_from_string(std::string_view text);
bool is_legal_transition(AssetStatus from, AssetStatus to);

struct AssetRecord {
    std::string asset_id;
    std::string keyword;
    GenerationPrompt prompt;
    std::string job_id;
    std::string mesh_ref;          // content-addressed GLB
    std::string frontal_view_ref;  // content-addressed PNG
    AssetStatus status = AssetStatus::Pending;
    std::string error;
    std::int64_t created_at = 0;
    std::int64_t updated_at = 0;

    /// Throws IllegalTransition for anything outside the status graph.
    void transition(AssetStatus to, std::int64_t now);
    bool operator==(const AssetRecord&) const = default;
};

nlohmann::json to_json(const GenerationPrompt& prompt);
nlohmann::json to_json(const AssetRecord& record);
AssetRecord asset_record_from_json(const nlohmann::json& j);

/// Deterministic asset id for a keyword in a book.
std::string make_asset_id(std::string_view book_id, EntityKind kind, std::string_view keyword);

struct EtaModel {
    double base_seconds = 0.0;
    double per_model_seconds = 0.0;
};

struct GenerationTimeSample {
    std::string title;
    int word_count = 0;
    int seconds = 0;
    int model_count = 0;
};

/// Measured end-to-end generation times of eleven books.
std::span<const GenerationTimeSample> generation_time_table();

/// Affine fit minimizing squared relative error over the samples.
EtaModel fit_eta(std::span<const GenerationTimeSample> samples);

/// The calibration shipped as configuration (fit_eta over generation_time_table()).
EtaModel default_eta_model();

/// round(base + per_model * model_count). Throws InvalidArgument for model_count < 1.
std::int64_t estimate_generation_seconds(int model_count, const EtaModel& eta);

/// Model count guess from word count, used before extraction finishes.
int provisional_model_count(std::size_t word_count);

struct ForgeConfig {
    std::size_t parallelism = 4;
    std::chrono::milliseconds poll_interval{500};
    std::chrono::milliseconds generation_timeout{300'000};
};

/// Drives text-to-3D jobs and persists their artifacts.
class AssetForge {
public:
    using Clock = std::chrono::steady_clock;
    /// Called after every status change of a record; calls are serialized.
    using Observer = std::function<void(const AssetRecord&)>;

    AssetForge(MeshGenerator& generator, BlobStore& blobs, ForgeConfig config = {});

    /// pending -> generating; stores the job id on the record.
    void submit_generation(AssetRecord& record, std::int64_t now);
    /// One poll. Returns true once the record reached generated or failed.
    bool poll_generation(AssetRecord& record, std::int64_t now);

    /// Submits (unless a job id is already recorded) and polls until the asset
    /// is generated, fails, or times out. Provider errors mark it failed.
    void run_to_completion(AssetRecord& record, const Observer& observer = {}, std::stop_token stop = {});

    /// Runs every pending or generating record with at most
    /// `config.parallelism` jobs in flight.
    void generate_all(std::vector<AssetRecord>& records, const Observer& observer = {}, std::stop_token stop = {});

private:
    MeshGenerator& generator_;
    BlobStore& blobs_;
    ForgeConfig config_;
};

std::int64_t unix_now();

}  // namespace bookforge
