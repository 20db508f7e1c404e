#include "bookforge/config.hpp"

#include "bookforge/error.hpp"
#include "bookforge/http_providers.hpp"
#include "bookforge/store.hpp"

#include <cstdlib>
#include <sstream>

namespace bookforge {

namespace {

std::string strip(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    return std::string(s.substr(first, s.find_last_not_of(" \t\r") - first + 1));
}

// Removes a trailing comment that is not inside a quoted string.
std::string drop_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

std::string unquote(const std::string& text, std::size_t line_number) {
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < text.size(); ++i) {
            if (text[i] == '\\' && i + 2 < text.size()) {
                const char next = text[++i];
                out += next == 'n' ? '\n' : next == 't' ? '\t' : next;
            } else {
                out += text[i];
            }
        }
        return out;
    }
    if (!text.empty() && text.front() == '"') {
        throw Error(ErrorCode::Config, "line " + std::to_string(line_number) + ": unterminated string");
    }
    return text;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
    KeyValueConfig config;
    std::istringstream in{std::string(text)};
    std::string section;
    std::size_t line_number = 0;
    for (std::string raw; std::getline(in, raw);) {
        ++line_number;
        const std::string line = strip(drop_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(ErrorCode::Config, "line " + std::to_string(line_number) + ": bad section header");
            section = strip(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::Config, "line " + std::to_string(line_number) + ": expected key = value");
        const std::string key = unquote(strip(line.substr(0, eq)), line_number);
        if (key.empty()) throw Error(ErrorCode::Config, "line " + std::to_string(line_number) + ": empty key");
        config.values_[section.empty() ? key : section + "." + key] = unquote(strip(line.substr(eq + 1)), line_number);
    }
    return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& file) {
    KeyValueConfig config = parse(read_file(file));
    config.base_dir = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
    return config;
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto value = get(key);
    if (!value) return fallback;
    try {
        std::size_t used = 0;
        const double d = std::stod(*value, &used);
        if (used == value->size()) return d;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::Config, key + " must be a number, got '" + *value + "'");
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
    const auto value = get(key);
    if (!value) return fallback;
    try {
        std::size_t used = 0;
        const long n = std::stol(*value, &used);
        if (used == value->size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::Config, key + " must be an integer, got '" + *value + "'");
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto value = get(key);
    if (!value) return fallback;
    if (*value == "true") return true;
    if (*value == "false") return false;
    throw Error(ErrorCode::Config, key + " must be true or false");
}

std::map<std::string, std::string> KeyValueConfig::section(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    const std::string head = prefix + ".";
    for (auto it = values_.lower_bound(head); it != values_.end() && it->first.rfind(head, 0) == 0; ++it) {
        out[it->first.substr(head.size())] = it->second;
    }
    return out;
}

void apply_environment(KeyValueConfig& config) {
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* value = std::getenv(name);
        if (value == nullptr || *value == '\0') return std::nullopt;
        return std::string(value);
    };
    for (const char* provider : {"llm", "mesh", "scorer", "tts"}) {
        std::string upper(provider);
        for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (auto url = env(("BOOKFORGE_" + upper + "_URL").c_str())) {
            config.set(std::string(provider) + ".kind", "http");
            config.set(std::string(provider) + ".url", *url);
        }
        if (auto token = env(("BOOKFORGE_" + upper + "_TOKEN").c_str())) config.set(std::string(provider) + ".token", *token);
    }
    if (auto threshold = env("BOOKFORGE_GATE_THRESHOLD")) config.set("gate.threshold", *threshold);
}

namespace {

Endpoint endpoint_for(const KeyValueConfig& config, const std::string& provider) {
    Endpoint endpoint;
    endpoint.url = config.get_string(provider + ".url", "");
    if (endpoint.url.empty()) throw Error(ErrorCode::Config, provider + ".url is required for kind = \"http\"");
    endpoint.token = config.get_string(provider + ".token", "");
    if (const auto env_name = config.get(provider + ".token_env")) {
        if (const char* token = std::getenv(env_name->c_str())) endpoint.token = token;
    }
    endpoint.timeout = std::chrono::seconds(config.get_int(provider + ".timeout_seconds", 30));
    return endpoint;
}

std::filesystem::path resolve(const KeyValueConfig& config, const std::string& path) {
    const std::filesystem::path p(path);
    return p.is_absolute() || config.base_dir.empty() ? p : config.base_dir / p;
}

Rational rational_from_decimal(double value) {
    constexpr std::int64_t kScale = 1'000'000;
    return Rational::of(static_cast<std::int64_t>(std::llround(value * kScale)), kScale);
}

}  // namespace

ProviderSet make_providers(const KeyValueConfig& config) {
    ProviderSet set;
    if (const auto log = config.get("mock.call_log")) set.call_log = std::make_unique<CallLog>(resolve(config, *log));
    CallLog* log = set.call_log.get();

    const std::string llm = config.get_string("llm.kind", "mock");
    if (llm == "http") {
        set.language_model = std::make_unique<HttpLanguageModel>(endpoint_for(config, "llm"));
    } else if (llm == "mock") {
        const auto fixture = config.get("llm.fixture");
        if (!fixture) throw Error(ErrorCode::Config, "llm.fixture is required for the mock language model");
        const auto document = nlohmann::json::parse(read_file(resolve(config, *fixture)), nullptr, false);
        if (document.is_discarded()) throw Error(ErrorCode::Config, "llm.fixture is not valid JSON");
        set.language_model = ScriptedLanguageModel::from_fixture(document, log);
    } else {
        throw Error(ErrorCode::Config, "llm.kind must be mock or http");
    }

    const std::string mesh = config.get_string("mesh.kind", "mock");
    if (mesh == "http") {
        set.mesh_generator = std::make_unique<HttpMeshGenerator>(endpoint_for(config, "mesh"));
    } else if (mesh == "mock") {
        MockMeshGenerator::Options options;
        options.latency = std::chrono::milliseconds(config.get_int("mesh.latency_ms", 0));
        options.provide_frontal = config.get_bool("mesh.provide_frontal", false);
        set.mesh_generator = std::make_unique<MockMeshGenerator>(options, log);
    } else {
        throw Error(ErrorCode::Config, "mesh.kind must be mock or http");
    }

    const std::string scorer = config.get_string("scorer.kind", "mock");
    if (scorer == "http") {
        set.scorer = std::make_unique<HttpSimilarityScorer>(endpoint_for(config, "scorer"));
    } else if (scorer == "mock") {
        auto mock = std::make_unique<MockSimilarityScorer>(config.get_double("scorer.default", 0.9), log);
        for (const auto& [keyword, value] : config.section("scorer.scores")) {
            mock->set_score(keyword, config.get_double("scorer.scores." + keyword, 0.9));
        }
        set.scorer = std::move(mock);
    } else {
        throw Error(ErrorCode::Config, "scorer.kind must be mock or http");
    }

    const std::string tts = config.get_string("tts.kind", "mock");
    if (tts == "http") {
        set.speech = std::make_unique<HttpSpeechSynthesizer>(endpoint_for(config, "tts"));
    } else if (tts == "mock") {
        set.speech = std::make_unique<MockSpeechSynthesizer>(
            rational_from_decimal(config.get_double("tts.seconds_per_word", 0.5)), log);
    } else {
        throw Error(ErrorCode::Config, "tts.kind must be mock or http");
    }

    if (config.get_string("ocr.kind", "none") == "http") {
        set.text_recognizer = std::make_unique<HttpTextRecognizer>(endpoint_for(config, "ocr"));
    }

    set.gate.threshold = config.get_double("gate.threshold", 0.7);
    set.gate.validate();
    set.forge.parallelism = static_cast<std::size_t>(config.get_int("forge.parallelism", 4));
    set.forge.poll_interval = std::chrono::milliseconds(config.get_int("forge.poll_interval_ms", 500));
    set.forge.generation_timeout = std::chrono::milliseconds(config.get_int("forge.timeout_seconds", 300) * 1000);
    set.retry.max_attempts = static_cast<int>(config.get_int("retry.max_attempts", 3));
    set.retry.base_backoff = std::chrono::milliseconds(config.get_int("retry.backoff_ms", 250));
    if (const auto prompts = config.get("prompts.file")) {
        set.prompts = PromptLibrary::from_json(nlohmann::json::parse(read_file(resolve(config, *prompts))));
    }
    return set;
}

}  // namespace bookforge
