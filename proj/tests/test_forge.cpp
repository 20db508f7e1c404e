#include <doctest.h>

#include "bookforge/error.hpp"
#include "bookforge/forge.hpp"
#include "bookforge/media.hpp"
#include "bookforge/mock_providers.hpp"
#include "bookforge/store.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <set>
#include <stop_token>
#include <thread>

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

constexpr std::array kStatuses = {AssetStatus::Pending,  AssetStatus::Generating, AssetStatus::Generated,
                                  AssetStatus::Scored,   AssetStatus::Kept,       AssetStatus::Removed,
                                  AssetStatus::Failed};

// The status graph written out edge by edge.
const std::set<std::pair<AssetStatus, AssetStatus>> kEdges = {
    {AssetStatus::Pending, AssetStatus::Generating},   {AssetStatus::Pending, AssetStatus::Failed},
    {AssetStatus::Generating, AssetStatus::Generated}, {AssetStatus::Generating, AssetStatus::Failed},
    {AssetStatus::Generated, AssetStatus::Scored},     {AssetStatus::Scored, AssetStatus::Kept},
    {AssetStatus::Scored, AssetStatus::Removed},
};

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

AssetRecord pending(const std::string& keyword) {
    AssetRecord record;
    record.asset_id = make_asset_id("book", EntityKind::Object, keyword);
    record.keyword = keyword;
    record.prompt = {keyword, EntityKind::Object, keyword + ". a thing.", {PromptSource::EntityName}};
    return record;
}

ForgeConfig quick(std::size_t parallelism, int timeout_ms = 5000) {
    ForgeConfig config;
    config.parallelism = parallelism;
    config.poll_interval = std::chrono::milliseconds(2);
    config.generation_timeout = std::chrono::milliseconds(timeout_ms);
    return config;
}

void walk(std::vector<AssetStatus>& trace, int depth) {
    // Replays the trace on a fresh record: accepted exactly when every step is an edge.
    AssetRecord record;
    bool legal = true;
    for (std::size_t i = 1; i < trace.size(); ++i) legal = legal && kEdges.count({trace[i - 1], trace[i]}) > 0;
    bool accepted = true;
    try {
        for (std::size_t i = 1; i < trace.size(); ++i) record.transition(trace[i], static_cast<std::int64_t>(i));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IllegalTransition);
        accepted = false;
    }
    CHECK(accepted == legal);
    if (accepted) CHECK(record.status == trace.back());
    if (depth == 0) return;
    for (AssetStatus next : kStatuses) {
        trace.push_back(next);
        walk(trace, depth - 1);
        trace.pop_back();
    }
}

}  // namespace

TEST_CASE("every short status trace is accepted exactly when it follows the graph") {
    std::vector<AssetStatus> trace = {AssetStatus::Pending};
    walk(trace, 5);
    for (AssetStatus from : kStatuses) {
        for (AssetStatus to : kStatuses) CHECK(is_legal_transition(from, to) == (kEdges.count({from, to}) > 0));
        CHECK(asset_status_from_string(to_string(from)) == from);
    }
}

TEST_CASE("asset records survive JSON") {
    auto record = pending("teapot");
    record.job_id = "job-1";
    record.status = AssetStatus::Generating;
    record.error = "none";
    CHECK(asset_record_from_json(to_json(record)) == record);
}

TEST_CASE("asset ids are stable and case-insensitive in the keyword") {
    CHECK(make_asset_id("b1", EntityKind::Object, "Chair") == make_asset_id("b1", EntityKind::Object, "chair"));
    CHECK(make_asset_id("b1", EntityKind::Object, "chair") != make_asset_id("b2", EntityKind::Object, "chair"));
    CHECK(make_asset_id("b1", EntityKind::Object, "bear") != make_asset_id("b1", EntityKind::Character, "bear"));
    CHECK(make_asset_id("b1", EntityKind::Object, "chair").size() == 16);
}

TEST_CASE("generation prompts") {
    CharacterProfile girl{"Goldilocks", "female", "English", "child", "golden curls", "blue dress", "unspecified"};
    const auto p = build_generation_prompt(girl);
    CHECK(p.prompt_text ==
          "Goldilocks. gender: female; nationality: English; age: child; appearance: golden curls; clothing: blue dress; era of life: unspecified.");
    CHECK(p.kind == EntityKind::Character);
    girl.clothing.clear();
    CHECK(code_of([&] { build_generation_prompt(girl); }) == ErrorCode::IncompleteProfile);

    const HistoricalContext setting{"Three Kingdoms period", "the Yangtze river", "War junks with straw bales"};
    const ObjectProfile boats{"straw boats", "boats lined with straw to catch arrows", "wooden junks covered in straw bales"};
    const auto q = build_generation_prompt(boats, setting);
    CHECK(q.prompt_text ==
          "straw boats. Setting: Three Kingdoms period, the Yangtze river. War junks with straw bales. wooden junks covered in straw bales");
    CHECK(q.source_parts.size() == 3);
    CHECK(code_of([&] { build_generation_prompt(boats, HistoricalContext{"", "x", "y"}); }) == ErrorCode::IncompleteProfile);
    CHECK(code_of([&] { build_generation_prompt(ObjectProfile{"x", "y", ""}, setting); }) == ErrorCode::IncompleteProfile);
}

TEST_CASE("ETA calibration") {
    const auto table = generation_time_table();
    REQUIRE(table.size() == 11);
    const auto eta = default_eta_model();
    // Closed-form weighted least squares, computed independently.
    CHECK(eta.base_seconds == doctest::Approx(31.588529768341623).epsilon(1e-9));
    CHECK(eta.per_model_seconds == doctest::Approx(12.115286708443634).epsilon(1e-9));
    for (const auto& row : table) {
        const auto predicted = static_cast<double>(estimate_generation_seconds(row.model_count, eta));
        CHECK(std::abs(predicted - row.seconds) <= 0.25 * row.seconds);
    }
    CHECK(estimate_generation_seconds(6, eta) == 104);
    CHECK(estimate_generation_seconds(15, eta) == 213);
    std::int64_t previous = 0;
    for (int m = 1; m <= 40; ++m) {
        const auto t = estimate_generation_seconds(m, eta);
        CHECK(t >= previous);
        previous = t;
    }
    CHECK(code_of([&] { estimate_generation_seconds(0, eta); }) == ErrorCode::InvalidArgument);
    CHECK(provisional_model_count(0) == 4);
    CHECK(provisional_model_count(1015) == 8);
    CHECK(provisional_model_count(100000) == 15);
}

TEST_CASE("generation stores the mesh and a frontal view") {
    TempDir dir("bookforge-forge-basic");
    BlobStore blobs(dir.path);
    MockMeshGenerator generator;
    AssetForge forge(generator, blobs, quick(2));
    auto record = pending("teapot");
    std::vector<AssetStatus> seen;
    forge.run_to_completion(record, [&](const AssetRecord& r) { seen.push_back(r.status); });
    CHECK(seen == std::vector<AssetStatus>{AssetStatus::Generating, AssetStatus::Generated});
    CHECK(record.status == AssetStatus::Generated);
    CHECK(parse_glb(blobs.get(record.mesh_ref)).positions.size() > 0);
    CHECK(is_png(blobs.get(record.frontal_view_ref)));
}

TEST_CASE("no more jobs in flight than the parallelism bound") {
    TempDir dir("bookforge-forge-bound");
    BlobStore blobs(dir.path);
    MockMeshGenerator::Options options;
    options.latency = std::chrono::milliseconds(40);
    MockMeshGenerator generator(options);
    AssetForge forge(generator, blobs, quick(2));
    std::vector<AssetRecord> records;
    for (int i = 0; i < 8; ++i) records.push_back(pending("thing " + std::to_string(i)));
    forge.generate_all(records);
    CHECK(generator.max_in_flight() == 2);
    CHECK(generator.submissions() == 8);
    for (const auto& r : records) CHECK(r.status == AssetStatus::Generated);
}

TEST_CASE("stalled, rejected and unreachable jobs fail their asset only") {
    TempDir dir("bookforge-forge-fail");
    BlobStore blobs(dir.path);
    MockMeshGenerator::Options options;
    options.never_finish = {"slow"};
    options.reject = {"weapon"};
    MockMeshGenerator generator(options);
    AssetForge forge(generator, blobs, quick(3, 60));
    std::vector<AssetRecord> records = {pending("slow cart"), pending("weapon rack"), pending("teapot")};
    forge.generate_all(records);
    CHECK(records[0].status == AssetStatus::Failed);
    CHECK(records[0].error.rfind("GenerationTimeout", 0) == 0);
    CHECK(records[1].status == AssetStatus::Failed);
    CHECK(records[1].error.rfind("ProviderRejectedPrompt", 0) == 0);
    CHECK(records[2].status == AssetStatus::Generated);

    MockMeshGenerator::Options down;
    down.down = true;
    MockMeshGenerator offline(down);
    AssetForge forge2(offline, blobs, quick(1));
    auto record = pending("teapot");
    forge2.run_to_completion(record);
    CHECK(record.status == AssetStatus::Failed);
    CHECK(record.error.rfind("ProviderUnavailable", 0) == 0);
}

TEST_CASE("a recorded job is polled, not resubmitted") {
    TempDir dir("bookforge-forge-resume");
    BlobStore blobs(dir.path);
    MockMeshGenerator::Options options;
    options.latency = std::chrono::milliseconds(30);
    MockMeshGenerator first(options);
    auto record = pending("teapot");
    AssetForge(first, blobs, quick(1)).submit_generation(record, 1);
    CHECK(record.status == AssetStatus::Generating);

    MockMeshGenerator second(options);  // a fresh process
    AssetForge(second, blobs, quick(1)).run_to_completion(record);
    CHECK(record.status == AssetStatus::Generated);
    CHECK(second.submissions() == 0);
}

TEST_CASE("a stop request leaves jobs resumable") {
    TempDir dir("bookforge-forge-stop");
    BlobStore blobs(dir.path);
    MockMeshGenerator::Options options;
    options.latency = std::chrono::milliseconds(10000);
    MockMeshGenerator generator(options);
    AssetForge forge(generator, blobs, quick(2, 60000));
    std::vector<AssetRecord> records = {pending("a"), pending("b")};
    std::stop_source stop;
    std::jthread stopper([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        stop.request_stop();
    });
    forge.generate_all(records, {}, stop.get_token());
    for (const auto& r : records) {
        CHECK(r.status == AssetStatus::Generating);
        CHECK_FALSE(r.job_id.empty());
    }
}
