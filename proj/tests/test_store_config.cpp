#include <doctest.h>

#include "bookforge/config.hpp"
#include "bookforge/error.hpp"
#include "bookforge/store.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>

using namespace bookforge;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::Io;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("blob store is content addressed") {
    TempDir dir("bookforge-blobs");
    BlobStore blobs(dir.path);
    const auto a = blobs.put("hello", "txt");
    CHECK(a == sha256_hex("hello") + ".txt");
    CHECK(blobs.put("hello", "txt") == a);
    CHECK(blobs.get(a) == "hello");
    CHECK(blobs.contains(a));
    CHECK_FALSE(blobs.contains(""));
    CHECK(code_of([&] { blobs.get(sha256_hex("nope") + ".txt"); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { blobs.path_of("../etc/passwd"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("journal replays appended entries and tolerates a torn tail") {
    TempDir dir("bookforge-journal");
    const auto file = dir.path / "journal.jsonl";
    {
        Journal journal(file);
        for (int i = 0; i < 5; ++i) journal.append({{"n", i}});
    }
    {
        std::ofstream torn(file, std::ios::app | std::ios::binary);
        torn << "{\"n\": 5, \"trunc";
    }
    auto entries = Journal(file).replay();
    REQUIRE(entries.size() == 5);
    CHECK(entries[4]["n"] == 4);

    // a broken line in the middle is corruption, not a torn write
    {
        std::ofstream more(file, std::ios::app | std::ios::binary);
        more << "\n{\"n\": 6}\n";
    }
    CHECK(code_of([&] { Journal(file).replay(); }) == ErrorCode::Io);
}

TEST_CASE("config parsing") {
    const auto config = KeyValueConfig::parse(R"(
# providers
top = 1
[llm]
kind = "mock"   # trailing comment
fixture = "a # b.json"
[scorer.scores]
"garden path" = 0.55
porridge = 0.7
[forge]
parallelism = 2
flag = true
)");
    CHECK(config.get_int("top", 0) == 1);
    CHECK(config.get_string("llm.kind", "") == "mock");
    CHECK(config.get_string("llm.fixture", "") == "a # b.json");
    CHECK(config.get_double("scorer.scores.garden path", 0) == doctest::Approx(0.55));
    CHECK(config.section("scorer.scores").size() == 2);
    CHECK(config.get_int("forge.parallelism", 0) == 2);
    CHECK(config.get_bool("forge.flag", false));
    CHECK(config.get_int("missing", 9) == 9);
    CHECK(code_of([&] { config.get_int("llm.kind", 0); }) == ErrorCode::Config);
    CHECK(code_of([&] { config.get_bool("top", false); }) == ErrorCode::Config);
    CHECK(code_of([] { KeyValueConfig::parse("[broken"); }) == ErrorCode::Config);
    CHECK(code_of([] { KeyValueConfig::parse("no equals sign"); }) == ErrorCode::Config);
    CHECK(code_of([] { KeyValueConfig::parse("k = \"open"); }) == ErrorCode::Config);
}

TEST_CASE("environment overrides") {
    KeyValueConfig config = KeyValueConfig::parse("[mesh]\nkind = \"mock\"\n");
    ::setenv("BOOKFORGE_MESH_URL", "http://127.0.0.1:9/mesh", 1);
    ::setenv("BOOKFORGE_MESH_TOKEN", "secret", 1);
    ::setenv("BOOKFORGE_GATE_THRESHOLD", "0.8", 1);
    apply_environment(config);
    ::unsetenv("BOOKFORGE_MESH_URL");
    ::unsetenv("BOOKFORGE_MESH_TOKEN");
    ::unsetenv("BOOKFORGE_GATE_THRESHOLD");
    CHECK(config.get_string("mesh.kind", "") == "http");
    CHECK(config.get_string("mesh.url", "") == "http://127.0.0.1:9/mesh");
    CHECK(config.get_string("mesh.token", "") == "secret");
    CHECK(config.get_double("gate.threshold", 0) == doctest::Approx(0.8));
}

TEST_CASE("provider construction") {
    const fs::path fixtures = BOOKFORGE_FIXTURES;
    auto config = KeyValueConfig::load(fixtures / "golden" / "providers.toml");
    auto set = make_providers(config);
    CHECK(set.language_model != nullptr);
    CHECK(set.text_recognizer == nullptr);
    CHECK(set.forge.parallelism > 0);

    config.set("llm.kind", "carrier-pigeon");
    CHECK(code_of([&] { make_providers(config); }) == ErrorCode::Config);
    config.set("llm.kind", "http");
    CHECK(code_of([&] { make_providers(config); }) == ErrorCode::Config);  // no url
    config.set("llm.kind", "mock");
    config.set("gate.threshold", "1.5");
    CHECK(code_of([&] { make_providers(config); }) == ErrorCode::Config);
}
