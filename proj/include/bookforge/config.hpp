#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bookforge/forge.hpp"
#include "bookforge/gate.hpp"
#include "bookforge/mock_providers.hpp"
#include "bookforge/narrative.hpp"
#include "bookforge/providers.hpp"

namespace bookforge {

/// Flat "section.key" -> value view of a TOML-style file: [section] headers,
/// `key = value` lines, quoted or bare keys, string/number/bool values, and
/// `#` comments.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text);
    static KeyValueConfig load(const std::filesystem::path& file);

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::optional<std::string> get(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Entries under "prefix." with the prefix stripped.
    std::map<std::string, std::string> section(const std::string& prefix) const;

    /// Directory relative paths in the file resolve against.
    std::filesystem::path base_dir;

private:
    std::map<std::string, std::string> values_;
};

/// Overrides from BOOKFORGE_* environment variables: LLM_URL, LLM_TOKEN,
/// MESH_URL, MESH_TOKEN, SCORER_URL, SCORER_TOKEN, TTS_URL, TTS_TOKEN,
/// GATE_THRESHOLD. A URL switches that provider to kind "http".
void apply_environment(KeyValueConfig& config);

/// Providers and tuning assembled from a config.
struct ProviderSet {
    std::unique_ptr<CallLog> call_log;
    std::unique_ptr<LanguageModel> language_model;
    std::unique_ptr<MeshGenerator> mesh_generator;
    std::unique_ptr<SimilarityScorer> scorer;
    std::unique_ptr<SpeechSynthesizer> speech;
    std::unique_ptr<TextRecognizer> text_recognizer;  // null unless [ocr] is configured
    GateConfig gate;
    ForgeConfig forge;
    RetryPolicy retry;
    PromptLibrary prompts = PromptLibrary::builtin();
};

ProviderSet make_providers(const KeyValueConfig& config);

}  // namespace bookforge
