#pragma once

#include <chrono>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bookforge/ingest.hpp"
#include "bookforge/providers.hpp"

namespace bookforge {

/// Sentinel for a character attribute the story gives no evidence for.
inline constexpr std::string_view kUnspecified = "unspecified";

/// Upper bound on entities kept from extraction, by salience.
inline constexpr std::size_t kMaxEntities = 32;

struct HistoricalContext {
    std::string era;
    std::string place;
    std::string cultural_notes;

    bool operator==(const HistoricalContext&) const = default;
};

struct CharacterProfile {
    std::string name;
    std::string gender;
    std::string nationality;
    std::string age;
    std::string appearance_features;
    std::string clothing;
    std::string era_of_life;

    /// The six attributes as "label: value" clauses in a fixed order.
    std::string description() const;
    bool operator==(const CharacterProfile&) const = default;
};

struct ObjectProfile {
    std::string name;
    std::string explanation;
    std::string context_description;

    bool operator==(const ObjectProfile&) const = default;
};

struct ExtractedEntities {
    std::vector<std::string> characters;
    std::vector<std::string> objects;

    bool operator==(const ExtractedEntities&) const = default;
};

struct EntityCatalog {
    std::vector<CharacterProfile> characters;
    std::vector<ObjectProfile> objects;
    HistoricalContext historical_context;

    bool operator==(const EntityCatalog&) const = default;
};

struct PromptTemplate {
    int step_id = 1;
    std::string version;
    std::string template_text;  // {{placeholder}} slots
    nlohmann::json schema;      // shape the reply must follow

    /// Throws InvalidArgument if any placeholder stays unbound.
    std::string render(const std::map<std::string, std::string>& bindings) const;
};

/// Instruction templates for steps 1-4, loaded from versioned JSON.
class PromptLibrary {
public:
    /// The templates shipped with the library.
    static PromptLibrary builtin();
    static PromptLibrary from_json(const nlohmann::json& document);

    const PromptTemplate& step(int step_id) const;
    const std::string& version() const { return version_; }

private:
    std::string version_;
    std::map<int, PromptTemplate> templates_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_backoff{250};
};

// Strict parsers for each step's reply. Any deviation throws MalformedOutput.
ExtractedEntities parse_extraction(std::string_view reply);
HistoricalContext parse_historical_context(std::string_view reply);
/// Throws SchemaViolation for a profile whose name was not requested.
std::vector<CharacterProfile> parse_character_profiles(std::string_view reply,
                                                       const std::vector<std::string>& names);
std::vector<ObjectProfile> parse_object_profiles(std::string_view reply,
                                                 const std::vector<std::string>& names);

nlohmann::json to_json(const HistoricalContext& context);
nlohmann::json to_json(const CharacterProfile& profile);
nlohmann::json to_json(const ObjectProfile& profile);
nlohmann::json to_json(const ExtractedEntities& entities);
HistoricalContext historical_context_from_json(const nlohmann::json& j);
CharacterProfile character_profile_from_json(const nlohmann::json& j);
ObjectProfile object_profile_from_json(const nlohmann::json& j);
ExtractedEntities extracted_entities_from_json(const nlohmann::json& j);

/// Steps 1-4 against a language model. Malformed replies are re-asked with a
/// repair note; provider outages are retried with exponential backoff. Both
/// draw on one budget of `RetryPolicy::max_attempts` calls per step.
class NarrativePipeline {
public:
    NarrativePipeline(LanguageModel& model, RetryPolicy retry = {},
                      PromptLibrary prompts = PromptLibrary::builtin());

    ExtractedEntities extract_entities(const StoryDocument& doc);
    HistoricalContext infer_historical_context(const StoryDocument& doc);
    std::vector<CharacterProfile> describe_characters(const StoryDocument& doc,
                                                      const std::vector<std::string>& names);
    std::vector<ObjectProfile> describe_objects(const StoryDocument& doc, const std::vector<std::string>& names,
                                                const HistoricalContext& context);

    /// All four steps; steps 3 and 4 run concurrently.
    EntityCatalog build_catalog(const StoryDocument& doc);

private:
    template <typename Parse>
    auto ask(int step, const std::string& instruction, const StoryDocument& doc, const nlohmann::json& context,
             Parse&& parse);

    LanguageModel& model_;
    RetryPolicy retry_;
    PromptLibrary prompts_;
};

}  // namespace bookforge
