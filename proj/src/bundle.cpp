#include "bookforge/bundle.hpp"

#include "bookforge/error.hpp"
#include "bookforge/media.hpp"
#include "bookforge/providers.hpp"
#include "bookforge/store.hpp"

#include <zlib.h>

namespace bookforge {

using nlohmann::json;

namespace {

json rational_json(const Rational& r) { return {{"num", r.num}, {"den", r.den}}; }

}  // namespace

std::string bundle_asset_path(const ManifestAsset& asset) { return "assets/" + asset.mesh_ref; }

std::string bundle_audio_path(const NarrationTrack& track) {
    const auto dot = track.audio_ref.rfind('.');
    const std::string ext = dot == std::string::npos ? "wav" : track.audio_ref.substr(dot + 1);
    return "audio/page_" + std::to_string(track.page_index) + "." + ext;
}

json BookManifest::to_json() const {
    json j_pages = json::array();
    for (const auto& page : pages) {
        json occurrences = json::array();
        for (const auto& occ : page.occurrences) {
            occurrences.push_back({{"keyword", occ.keyword},
                                   {"kind", bookforge::to_string(occ.kind)},
                                   {"global_position", occ.global_position},
                                   {"page_relative_position", occ.global_position - page.start_word},
                                   {"match", bookforge::to_string(occ.match)}});
        }
        j_pages.push_back({{"page_index", page.page_index},
                           {"start_word", page.start_word},
                           {"end_word", page.end_word},
                           {"word_count", page.word_count()},
                           {"first_keyword_position", page.first_keyword_position()},
                           {"last_keyword_position", page.last_keyword_position()},
                           {"occurrences", occurrences}});
    }
    json j_popups = json::array();
    for (const auto& p : popups) {
        j_popups.push_back({{"keyword", p.keyword},
                            {"asset_id", p.asset_id},
                            {"page_index", p.page_index},
                            {"words_before", p.page_relative_position},
                            {"popup_seconds", p.popup_seconds}});
    }
    json j_narration = json::array();
    for (const auto& t : narration) {
        j_narration.push_back({{"page_index", t.page_index},
                               {"audio", bundle_audio_path(t)},
                               {"duration_seconds", t.duration_seconds.to_double()},
                               {"duration_exact", rational_json(t.duration_seconds)},
                               {"speech_rate", t.speech_rate.to_double()},
                               {"speech_rate_exact", rational_json(t.speech_rate)}});
    }
    json j_assets = json::array();
    for (const auto& a : assets) {
        j_assets.push_back({{"asset_id", a.asset_id}, {"keyword", a.keyword}, {"mesh", bundle_asset_path(a)}});
    }
    return {{"book_id", book_id},   {"title", title},         {"format_version", format_version},
            {"pages", j_pages},     {"popups", j_popups},     {"narration", j_narration},
            {"assets", j_assets}};
}

std::string BookManifest::canonical_json() const { return to_json().dump(2) + "\n"; }

NarrationTrack synthesize_narration(const PageLayout& page, const StoryDocument& doc, SpeechSynthesizer& tts,
                                    BlobStore& blobs) {
    if (page.end_word <= page.start_word || page.end_word > doc.word_count()) {
        throw Error(ErrorCode::InvalidArgument, "page " + std::to_string(page.page_index) + " has an invalid span");
    }
    const std::string audio = tts.synthesize(std::string(doc.text_of_words(page.start_word, page.end_word)), doc.language);
    Rational duration;
    try {
        duration = wav_duration_seconds(audio);
    } catch (const Error& e) {
        throw Error(ErrorCode::TtsUnavailable, std::string("unreadable narration audio: ") + e.what());
    }
    if (!duration.positive()) {
        throw Error(ErrorCode::ZeroDurationAudio, "narration for page " + std::to_string(page.page_index) + " is empty");
    }
    NarrationTrack track;
    track.page_index = page.page_index;
    track.audio_ref = blobs.put(audio, "wav");
    track.duration_seconds = duration;
    track.speech_rate = speech_rate(page.word_count(), duration);
    return track;
}

BookManifest assemble_manifest(std::string book_id, std::string title, std::vector<PageLayout> pages,
                               std::vector<PopupEvent> popups, std::vector<NarrationTrack> narration,
                               std::vector<ManifestAsset> kept_assets, const std::set<std::string>& removed) {
    if (pages.empty()) throw Error(ErrorCode::EmptyBook, "book has no pages");
    std::set<std::string> kept;
    for (const auto& asset : kept_assets) {
        if (removed.count(asset.asset_id)) {
            throw Error(ErrorCode::RemovedAssetReferenced, "asset " + asset.asset_id + " was removed in review");
        }
        if (!kept.insert(asset.asset_id).second) {
            throw Error(ErrorCode::InvalidArgument, "asset " + asset.asset_id + " listed twice");
        }
        if (asset.mesh_ref.empty()) throw Error(ErrorCode::DanglingReference, "asset " + asset.asset_id + " has no mesh");
    }
    std::set<std::string> popped;
    for (const auto& popup : popups) {
        if (removed.count(popup.asset_id)) {
            throw Error(ErrorCode::RemovedAssetReferenced, "pop-up '" + popup.keyword + "' uses removed asset " + popup.asset_id);
        }
        if (!kept.count(popup.asset_id)) {
            throw Error(ErrorCode::DanglingReference, "pop-up '" + popup.keyword + "' uses unknown asset '" + popup.asset_id + "'");
        }
        if (!popped.insert(popup.asset_id).second) {
            throw Error(ErrorCode::InvalidArgument, "asset " + popup.asset_id + " pops up more than once");
        }
        if (popup.page_index < 1 || popup.page_index > pages.size()) {
            throw Error(ErrorCode::DanglingReference, "pop-up '" + popup.keyword + "' names a missing page");
        }
    }
    std::vector<int> tracks_per_page(pages.size(), 0);
    for (const auto& track : narration) {
        if (track.page_index < 1 || track.page_index > pages.size() || track.audio_ref.empty()) {
            throw Error(ErrorCode::DanglingReference, "narration track for a missing page");
        }
        ++tracks_per_page[track.page_index - 1];
    }
    for (std::size_t i = 0; i < pages.size(); ++i) {
        if (tracks_per_page[i] != 1) {
            throw Error(ErrorCode::DanglingReference, "page " + std::to_string(i + 1) + " needs exactly one narration track");
        }
    }

    BookManifest manifest;
    manifest.book_id = std::move(book_id);
    manifest.title = std::move(title);
    manifest.pages = std::move(pages);
    manifest.popups = std::move(popups);
    manifest.narration = std::move(narration);
    manifest.assets = std::move(kept_assets);
    return manifest;
}

std::map<std::string, std::string> bundle_entries(const BookManifest& manifest, const BlobStore& blobs) {
    std::map<std::string, std::string> entries;
    entries["manifest.json"] = manifest.canonical_json();
    for (const auto& asset : manifest.assets) entries[bundle_asset_path(asset)] = blobs.get(asset.mesh_ref);
    for (const auto& track : manifest.narration) entries[bundle_audio_path(track)] = blobs.get(track.audio_ref);
    return entries;
}

void write_bundle_directory(const BookManifest& manifest, const BlobStore& blobs, const std::filesystem::path& out) {
    for (const auto& [name, bytes] : bundle_entries(manifest, blobs)) write_file_atomic(out / name, bytes);
}

std::string make_bundle_archive(const BookManifest& manifest, const BlobStore& blobs) {
    return zip_store(bundle_entries(manifest, blobs));
}

namespace {

constexpr std::uint16_t kDosDate1980 = (0 << 9) | (1 << 5) | 1;
constexpr std::uint16_t kUtf8Names = 0x0800;

void le16(std::string& out, std::uint16_t v) {
    out += static_cast<char>(v & 0xff);
    out += static_cast<char>(v >> 8);
}

void le32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint32_t rd32(std::string_view b, std::size_t at) {
    if (at + 4 > b.size()) throw Error(ErrorCode::InvalidArgument, "truncated zip archive");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[at + static_cast<std::size_t>(i)]);
    return v;
}

std::uint16_t rd16(std::string_view b, std::size_t at) {
    if (at + 2 > b.size()) throw Error(ErrorCode::InvalidArgument, "truncated zip archive");
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) | (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t crc_of(std::string_view bytes) {
    return static_cast<std::uint32_t>(crc32(0, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::string zip_store(const std::map<std::string, std::string>& entries) {
    std::string out;
    std::string central;
    for (const auto& [name, data] : entries) {
        const std::uint32_t offset = static_cast<std::uint32_t>(out.size());
        const std::uint32_t crc = crc_of(data);
        const auto size = static_cast<std::uint32_t>(data.size());

        le32(out, 0x04034b50);
        le16(out, 20);
        le16(out, kUtf8Names);
        le16(out, 0);  // stored
        le16(out, 0);
        le16(out, kDosDate1980);
        le32(out, crc);
        le32(out, size);
        le32(out, size);
        le16(out, static_cast<std::uint16_t>(name.size()));
        le16(out, 0);
        out += name;
        out += data;

        le32(central, 0x02014b50);
        le16(central, 20);
        le16(central, 20);
        le16(central, kUtf8Names);
        le16(central, 0);
        le16(central, 0);
        le16(central, kDosDate1980);
        le32(central, crc);
        le32(central, size);
        le32(central, size);
        le16(central, static_cast<std::uint16_t>(name.size()));
        le16(central, 0);
        le16(central, 0);
        le16(central, 0);
        le16(central, 0);
        le32(central, 0);
        le32(central, offset);
        central += name;
    }
    const auto central_offset = static_cast<std::uint32_t>(out.size());
    out += central;
    le32(out, 0x06054b50);
    le16(out, 0);
    le16(out, 0);
    le16(out, static_cast<std::uint16_t>(entries.size()));
    le16(out, static_cast<std::uint16_t>(entries.size()));
    le32(out, static_cast<std::uint32_t>(central.size()));
    le32(out, central_offset);
    le16(out, 0);
    return out;
}

std::map<std::string, std::string> unzip_store(std::string_view archive) {
    if (archive.size() < 22) throw Error(ErrorCode::InvalidArgument, "not a zip archive");
    std::size_t eocd = archive.size() - 22;
    while (rd32(archive, eocd) != 0x06054b50) {
        if (eocd == 0 || archive.size() - eocd > 22 + 0xffff) throw Error(ErrorCode::InvalidArgument, "zip end record missing");
        --eocd;
    }
    const std::uint16_t count = rd16(archive, eocd + 10);
    std::size_t at = rd32(archive, eocd + 16);
    std::map<std::string, std::string> entries;
    for (std::uint16_t i = 0; i < count; ++i) {
        if (rd32(archive, at) != 0x02014b50) throw Error(ErrorCode::InvalidArgument, "bad zip central directory");
        const std::uint16_t method = rd16(archive, at + 10);
        const std::uint32_t crc = rd32(archive, at + 16);
        const std::uint32_t size = rd32(archive, at + 20);
        const std::uint16_t name_len = rd16(archive, at + 28);
        const std::size_t skip = name_len + rd16(archive, at + 30) + rd16(archive, at + 32);
        const std::uint32_t local = rd32(archive, at + 42);
        if (at + 46 + name_len > archive.size()) throw Error(ErrorCode::InvalidArgument, "truncated zip archive");
        std::string name(archive.substr(at + 46, name_len));
        if (method != 0) throw Error(ErrorCode::InvalidArgument, "zip entry " + name + " is compressed");
        const std::size_t data_at = local + 30 + rd16(archive, local + 26) + rd16(archive, local + 28);
        if (data_at + size > archive.size()) throw Error(ErrorCode::InvalidArgument, "truncated zip entry " + name);
        std::string data(archive.substr(data_at, size));
        if (crc_of(data) != crc) throw Error(ErrorCode::InvalidArgument, "CRC mismatch in " + name);
        entries.emplace(std::move(name), std::move(data));
        at += 46 + skip;
    }
    return entries;
}

json validate_bundle_archive(std::string_view archive) {
    const auto entries = unzip_store(archive);
    auto manifest_it = entries.find("manifest.json");
    if (manifest_it == entries.end()) throw Error(ErrorCode::DanglingReference, "bundle has no manifest.json");
    json manifest = json::parse(manifest_it->second, nullptr, false);
    if (manifest.is_discarded()) throw Error(ErrorCode::InvalidArgument, "manifest.json is not valid JSON");
    try {
        if (manifest.at("format_version").get<std::string>() != kManifestFormatVersion) {
            throw Error(ErrorCode::InvalidArgument, "unsupported manifest format");
        }
        std::set<std::string> asset_ids;
        for (const auto& asset : manifest.at("assets")) {
            const auto path = asset.at("mesh").get<std::string>();
            if (!entries.count(path)) throw Error(ErrorCode::DanglingReference, "bundle lacks " + path);
            parse_glb(entries.at(path));
            asset_ids.insert(asset.at("asset_id").get<std::string>());
        }
        for (const auto& track : manifest.at("narration")) {
            const auto path = track.at("audio").get<std::string>();
            if (!entries.count(path)) throw Error(ErrorCode::DanglingReference, "bundle lacks " + path);
        }
        for (const auto& popup : manifest.at("popups")) {
            if (!asset_ids.count(popup.at("asset_id").get<std::string>())) {
                throw Error(ErrorCode::DanglingReference, "pop-up references an asset missing from the bundle");
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("manifest structure: ") + e.what());
    }
    return manifest;
}

}  // namespace bookforge
