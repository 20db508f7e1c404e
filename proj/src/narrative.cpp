#include "bookforge/narrative.hpp"

#include "bookforge/error.hpp"
#include "prompts_resource.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace bookforge {

using nlohmann::json;

std::string CharacterProfile::description() const {
    return "gender: " + gender + "; nationality: " + nationality + "; age: " + age +
           "; appearance: " + appearance_features + "; clothing: " + clothing + "; era of life: " + era_of_life;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
    std::string out;
    std::size_t cursor = 0;
    while (true) {
        const auto open = template_text.find("{{", cursor);
        if (open == std::string::npos) break;
        const auto close = template_text.find("}}", open + 2);
        if (close == std::string::npos) break;
        const std::string name = template_text.substr(open + 2, close - open - 2);
        auto it = bindings.find(name);
        if (it == bindings.end()) {
            throw Error(ErrorCode::InvalidArgument,
                        "step " + std::to_string(step_id) + " template leaves {{" + name + "}} unbound");
        }
        out.append(template_text, cursor, open - cursor);
        out += it->second;
        cursor = close + 2;
    }
    out.append(template_text, cursor, std::string::npos);
    return out;
}

PromptLibrary PromptLibrary::builtin() { return from_json(json::parse(kBuiltinPrompts)); }

PromptLibrary PromptLibrary::from_json(const json& document) {
    PromptLibrary library;
    try {
        library.version_ = document.at("version").get<std::string>();
        for (const auto& entry : document.at("steps")) {
            PromptTemplate t;
            t.step_id = entry.at("step").get<int>();
            t.version = library.version_;
            t.template_text = entry.at("template").get<std::string>();
            t.schema = entry.at("schema");
            library.templates_[t.step_id] = std::move(t);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("prompt library: ") + e.what());
    }
    for (int step = 1; step <= 4; ++step) {
        if (!library.templates_.count(step)) {
            throw Error(ErrorCode::Config, "prompt library lacks step " + std::to_string(step));
        }
    }
    return library;
}

const PromptTemplate& PromptLibrary::step(int step_id) const {
    auto it = templates_.find(step_id);
    if (it == templates_.end()) throw Error(ErrorCode::Config, "no template for step " + std::to_string(step_id));
    return it->second;
}

namespace {

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::MalformedOutput, why); }

std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(first, last - first + 1));
}

json parse_object(std::string_view reply) {
    json parsed = json::parse(reply.begin(), reply.end(), nullptr, false);
    if (parsed.is_discarded()) malformed("reply is not valid JSON");
    if (!parsed.is_object()) malformed("reply is not a JSON object");
    return parsed;
}

const json& require_array(const json& object, const char* key) {
    auto it = object.find(key);
    if (it == object.end() || !it->is_array()) malformed(std::string("'") + key + "' must be an array");
    return *it;
}

std::string require_text(const json& object, const char* key) {
    auto it = object.find(key);
    if (it == object.end() || !it->is_string()) malformed(std::string("'") + key + "' must be a string");
    std::string value = trim(it->get<std::string>());
    if (value.empty()) malformed(std::string("'") + key + "' is empty");
    return value;
}

std::string attribute_or_sentinel(const json& object, const char* key) {
    auto it = object.find(key);
    if (it == object.end() || it->is_null()) return std::string(kUnspecified);
    if (!it->is_string()) malformed(std::string("'") + key + "' must be a string");
    std::string value = trim(it->get<std::string>());
    return value.empty() ? std::string(kUnspecified) : value;
}

// Maps case-folded requested names back to their canonical spelling.
std::unordered_map<std::string, std::string> requested(const std::vector<std::string>& names) {
    std::unordered_map<std::string, std::string> out;
    for (const auto& name : names) out.emplace(case_fold(name), name);
    return out;
}

template <typename Profile, typename Fill>
std::vector<Profile> parse_profiles(std::string_view reply, const std::vector<std::string>& names,
                                    const char* list_key, Fill&& fill) {
    const json root = parse_object(reply);
    const auto wanted = requested(names);
    std::unordered_map<std::string, Profile> found;
    for (const auto& entry : require_array(root, list_key)) {
        if (!entry.is_object()) malformed(std::string("each of '") + list_key + "' must be an object");
        const std::string name = require_text(entry, "name");
        auto match = wanted.find(case_fold(name));
        if (match == wanted.end()) {
            throw Error(ErrorCode::SchemaViolation, "profile for unrequested name '" + name + "'");
        }
        Profile profile = fill(entry);
        profile.name = match->second;
        if (!found.emplace(match->first, std::move(profile)).second) malformed("duplicate profile for '" + name + "'");
    }
    std::vector<Profile> out;
    out.reserve(names.size());
    for (const auto& name : names) {
        auto it = found.find(case_fold(name));
        if (it == found.end()) malformed("no profile for '" + name + "'");
        out.push_back(std::move(it->second));
    }
    return out;
}

json names_json(const std::vector<std::string>& names) { return json(names); }

std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& name : names) {
        if (!out.empty()) out += ", ";
        out += name;
    }
    return out;
}

}  // namespace

ExtractedEntities parse_extraction(std::string_view reply) {
    const json root = parse_object(reply);
    struct Candidate {
        std::string name;
        EntityKind kind;
        double salience;
    };
    std::vector<Candidate> candidates;
    for (const auto& entry : require_array(root, "entities")) {
        if (!entry.is_object()) malformed("each entity must be an object");
        Candidate c{require_text(entry, "name"), EntityKind::Object, 0.0};
        const std::string kind = require_text(entry, "kind");
        if (kind == "character") {
            c.kind = EntityKind::Character;
        } else if (kind != "object") {
            malformed("entity kind must be 'character' or 'object', got '" + kind + "'");
        }
        auto salience = entry.find("salience");
        if (salience == entry.end() || !salience->is_number() || !std::isfinite(salience->get<double>())) {
            malformed("entity salience must be a number");
        }
        c.salience = salience->get<double>();
        candidates.push_back(std::move(c));
    }
    if (candidates.empty()) malformed("no entities extracted");

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return a.salience > b.salience; });
    ExtractedEntities out;
    std::unordered_set<std::string> seen;
    for (const auto& c : candidates) {
        if (seen.size() == kMaxEntities) break;
        if (!seen.insert(case_fold(c.name)).second) continue;
        (c.kind == EntityKind::Character ? out.characters : out.objects).push_back(c.name);
    }
    return out;
}

HistoricalContext parse_historical_context(std::string_view reply) {
    const json root = parse_object(reply);
    return {require_text(root, "era"), require_text(root, "place"), require_text(root, "cultural_notes")};
}

std::vector<CharacterProfile> parse_character_profiles(std::string_view reply, const std::vector<std::string>& names) {
    return parse_profiles<CharacterProfile>(reply, names, "characters", [](const json& entry) {
        CharacterProfile p;
        p.gender = attribute_or_sentinel(entry, "gender");
        p.nationality = attribute_or_sentinel(entry, "nationality");
        p.age = attribute_or_sentinel(entry, "age");
        p.appearance_features = attribute_or_sentinel(entry, "appearance_features");
        p.clothing = attribute_or_sentinel(entry, "clothing");
        p.era_of_life = attribute_or_sentinel(entry, "era_of_life");
        return p;
    });
}

std::vector<ObjectProfile> parse_object_profiles(std::string_view reply, const std::vector<std::string>& names) {
    return parse_profiles<ObjectProfile>(reply, names, "objects", [](const json& entry) {
        ObjectProfile p;
        p.explanation = require_text(entry, "explanation");
        p.context_description = require_text(entry, "context_description");
        return p;
    });
}

json to_json(const HistoricalContext& c) {
    return {{"era", c.era}, {"place", c.place}, {"cultural_notes", c.cultural_notes}};
}

json to_json(const CharacterProfile& p) {
    return {{"name", p.name},       {"gender", p.gender},     {"nationality", p.nationality},
            {"age", p.age},         {"appearance_features", p.appearance_features},
            {"clothing", p.clothing}, {"era_of_life", p.era_of_life}};
}

json to_json(const ObjectProfile& p) {
    return {{"name", p.name}, {"explanation", p.explanation}, {"context_description", p.context_description}};
}

json to_json(const ExtractedEntities& e) { return {{"characters", e.characters}, {"objects", e.objects}}; }

HistoricalContext historical_context_from_json(const json& j) {
    return {j.at("era").get<std::string>(), j.at("place").get<std::string>(), j.at("cultural_notes").get<std::string>()};
}

CharacterProfile character_profile_from_json(const json& j) {
    return {j.at("name").get<std::string>(),        j.at("gender").get<std::string>(),
            j.at("nationality").get<std::string>(), j.at("age").get<std::string>(),
            j.at("appearance_features").get<std::string>(), j.at("clothing").get<std::string>(),
            j.at("era_of_life").get<std::string>()};
}

ObjectProfile object_profile_from_json(const json& j) {
    return {j.at("name").get<std::string>(), j.at("explanation").get<std::string>(),
            j.at("context_description").get<std::string>()};
}

ExtractedEntities extracted_entities_from_json(const json& j) {
    return {j.at("characters").get<std::vector<std::string>>(), j.at("objects").get<std::vector<std::string>>()};
}

NarrativePipeline::NarrativePipeline(LanguageModel& model, RetryPolicy retry, PromptLibrary prompts)
    : model_(model), retry_(retry), prompts_(std::move(prompts)) {
    if (retry_.max_attempts < 1) throw Error(ErrorCode::Config, "retry budget must allow at least one attempt");
}

template <typename Parse>
auto NarrativePipeline::ask(int step, const std::string& instruction, const StoryDocument& doc,
                            const json& context, Parse&& parse) {
    if (doc.tokens.empty()) throw Error(ErrorCode::EmptyStory, "story has no words");
    LanguageModelRequest request{step, instruction, doc.body, context.dump()};
    ErrorCode last_code = ErrorCode::ProviderUnavailable;
    std::string last_message;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        if (attempt > 1 && retry_.base_backoff.count() > 0) {
            std::this_thread::sleep_for(retry_.base_backoff * (1 << std::min(attempt - 2, 16)));
        }
        try {
            return parse(model_.complete(request));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ProviderUnavailable && e.code() != ErrorCode::MalformedOutput) throw;
            last_code = e.code();
            last_message = e.what();
            if (e.code() == ErrorCode::MalformedOutput) {
                request.instruction = instruction +
                                      "\n\nYour previous reply was rejected (" + last_message +
                                      "). Reply again with only the JSON object described above.";
            }
        }
    }
    throw Error(last_code, "step " + std::to_string(step) + " failed after " +
                               std::to_string(retry_.max_attempts) + " attempts: " + last_message);
}

ExtractedEntities NarrativePipeline::extract_entities(const StoryDocument& doc) {
    const auto& t = prompts_.step(1);
    const auto instruction = t.render({{"title", doc.title}, {"schema", t.schema.dump()}});
    return ask(1, instruction, doc, json{{"title", doc.title}},
               [](const std::string& reply) { return parse_extraction(reply); });
}

HistoricalContext NarrativePipeline::infer_historical_context(const StoryDocument& doc) {
    const auto& t = prompts_.step(2);
    const auto instruction = t.render({{"title", doc.title}, {"schema", t.schema.dump()}});
    return ask(2, instruction, doc, json{{"title", doc.title}},
               [](const std::string& reply) { return parse_historical_context(reply); });
}

std::vector<CharacterProfile> NarrativePipeline::describe_characters(const StoryDocument& doc,
                                                                     const std::vector<std::string>& names) {
    if (names.empty()) return {};
    const auto& t = prompts_.step(3);
    const auto instruction = t.render({{"title", doc.title}, {"names", join(names)}, {"schema", t.schema.dump()}});
    return ask(3, instruction, doc, json{{"title", doc.title}, {"names", names_json(names)}},
               [&](const std::string& reply) { return parse_character_profiles(reply, names); });
}

std::vector<ObjectProfile> NarrativePipeline::describe_objects(const StoryDocument& doc,
                                                               const std::vector<std::string>& names,
                                                               const HistoricalContext& context) {
    if (names.empty()) return {};
    const auto& t = prompts_.step(4);
    const auto instruction = t.render({{"title", doc.title},
                                       {"names", join(names)},
                                       {"era", context.era},
                                       {"place", context.place},
                                       {"cultural_notes", context.cultural_notes},
                                       {"schema", t.schema.dump()}});
    return ask(4, instruction, doc,
               json{{"title", doc.title}, {"names", names_json(names)}, {"historical_context", to_json(context)}},
               [&](const std::string& reply) { return parse_object_profiles(reply, names); });
}

EntityCatalog NarrativePipeline::build_catalog(const StoryDocument& doc) {
    const ExtractedEntities entities = extract_entities(doc);
    EntityCatalog catalog;
    catalog.historical_context = infer_historical_context(doc);
    auto characters = std::async(std::launch::async, [&] { return describe_characters(doc, entities.characters); });
    catalog.objects = describe_objects(doc, entities.objects, catalog.historical_context);
    catalog.characters = characters.get();
    return catalog;
}

}  // namespace bookforge
