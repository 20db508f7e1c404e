#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bookforge/layout.hpp"

namespace bookforge {

class BlobStore;
class SpeechSynthesizer;

inline constexpr std::string_view kManifestFormatVersion = "1";

struct ManifestAsset {
    std::string asset_id;
    std::string keyword;
    std::string mesh_ref;  // store ref; bundle path is assets/<mesh_ref>

    bool operator==(const ManifestAsset&) const = default;
};

struct BookManifest {
    std::string book_id;
    std::string title;
    std::vector<PageLayout> pages;
    std::vector<PopupEvent> popups;
    std::vector<NarrationTrack> narration;
    std::vector<ManifestAsset> assets;
    std::string format_version{kManifestFormatVersion};

    nlohmann::json to_json() const;
    /// Sorted keys, two-space indent, UTF-8, LF line ends, trailing newline.
    std::string canonical_json() const;
};

/// Speaks the page's text and derives the speech rate from the audio length.
/// Throws TtsUnavailable or ZeroDurationAudio.
NarrationTrack synthesize_narration(const PageLayout& page, const StoryDocument& doc, SpeechSynthesizer& tts,
                                    BlobStore& blobs);

/// Checks every cross-reference and builds the manifest. `removed` lists
/// asset ids excluded in review. Throws DanglingReference or
/// RemovedAssetReferenced.
BookManifest assemble_manifest(std::string book_id, std::string title, std::vector<PageLayout> pages,
                               std::vector<PopupEvent> popups, std::vector<NarrationTrack> narration,
                               std::vector<ManifestAsset> kept_assets, const std::set<std::string>& removed = {});

std::string bundle_asset_path(const ManifestAsset& asset);
std::string bundle_audio_path(const NarrationTrack& track);

/// manifest.json + assets/<hash>.glb + audio/page_<n>.wav
std::map<std::string, std::string> bundle_entries(const BookManifest& manifest, const BlobStore& blobs);

void write_bundle_directory(const BookManifest& manifest, const BlobStore& blobs, const std::filesystem::path& out);

/// Deterministic zip of bundle_entries.
std::string make_bundle_archive(const BookManifest& manifest, const BlobStore& blobs);

/// Parses an archive and checks that the manifest and everything it
/// references are present. Returns the manifest JSON.
nlohmann::json validate_bundle_archive(std::string_view archive);

// Minimal zip support: stored entries, fixed timestamps, sorted names.
std::string zip_store(const std::map<std::string, std::string>& entries);
std::map<std::string, std::string> unzip_store(std::string_view archive);

}  // namespace bookforge
