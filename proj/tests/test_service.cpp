#include <doctest.h>

#include "bookforge/bundle.hpp"
#include "bookforge/config.hpp"
#include "bookforge/error.hpp"
#include "bookforge/service.hpp"
#include "bookforge/store.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <thread>

using namespace bookforge;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

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

const fs::path kGolden = fs::path(BOOKFORGE_FIXTURES) / "golden";

KeyValueConfig golden_config() { return KeyValueConfig::load(kGolden / "providers.toml"); }

std::string story() { return read_file(kGolden / "story.txt"); }

constexpr std::array kStates = {RunState::Received,   RunState::Extracting,     RunState::Contextualizing,
                                RunState::Describing, RunState::Generating,     RunState::Scoring,
                                RunState::AwaitingReview, RunState::Assembling, RunState::Ready,
                                RunState::Failed};

}  // namespace

TEST_CASE("run state graph") {
    for (std::size_t i = 0; i < kStates.size(); ++i) {
        for (std::size_t j = 0; j < kStates.size(); ++j) {
            const RunState from = kStates[i];
            const RunState to = kStates[j];
            bool expected = false;
            if (!is_terminal(from)) {
                expected = to == RunState::Failed || (to != RunState::Failed && j == i + 1) ||
                           (from == RunState::Scoring && to == RunState::Assembling);
            }
            CHECK_MESSAGE(is_legal_run_transition(from, to) == expected, to_string(from), " -> ", to_string(to));
        }
        CHECK(run_state_from_string(to_string(kStates[i])) == kStates[i]);
    }
    CHECK(is_terminal(RunState::Ready));
    CHECK(is_terminal(RunState::Failed));
}

TEST_CASE("book ids are deterministic") {
    CHECK(make_book_id("t", "body", "en", 1) == make_book_id("t", "body", "en", 1));
    CHECK(make_book_id("t", "body", "en", 1) != make_book_id("t", "body", "en", 2));
    CHECK(make_book_id("t", "body", "en", 1) != make_book_id("t", "body", "fr", 1));
    CHECK(make_book_id("t", "body", "en", 1) != make_book_id("tb", "ody", "en", 1));
}

TEST_CASE("a book runs to review, then to a bundle") {
    TempDir dir("bookforge-service-life");
    auto providers = make_providers(golden_config());
    PipelineService service(providers, {dir.path});
    const auto created = service.create_book("Goldilocks", story());
    CHECK(created.state == RunState::Received);
    REQUIRE(created.eta_seconds);
    CHECK(created.eta_provisional);
    const auto id = created.book_id;

    // nothing can be reviewed or downloaded before review opens
    REQUIRE(service.wait_until_settled(id, 20s) == RunState::AwaitingReview);
    const auto items = service.review_items(id);
    REQUIRE(items.size() == 1);
    CHECK(items[0].keyword == "garden path");
    CHECK(service.summary(id).eta_seconds.has_value());
    CHECK_FALSE(service.summary(id).eta_provisional);
    CHECK(code_of([&] { service.download_bundle(id); }) == ErrorCode::WrongState);
    CHECK(code_of([&] { service.manifest_json(id); }) == ErrorCode::WrongState);
    CHECK(code_of([&] { service.post_verdict(id, "no-such-asset", ReviewAction::Keep); }) == ErrorCode::UnknownAsset);
    CHECK(service.frontal_view(id, items[0].asset_id).substr(1, 3) == "PNG");

    service.complete_review(id);
    REQUIRE(service.wait_until_settled(id, 20s) == RunState::Ready);
    CHECK_FALSE(service.summary(id).eta_seconds.has_value());
    CHECK(code_of([&] { service.post_verdict(id, items[0].asset_id, ReviewAction::Keep); }) == ErrorCode::WrongState);
    CHECK(code_of([&] { service.complete_review(id); }) == ErrorCode::WrongState);

    const auto bundle = service.download_bundle(id);
    CHECK(bundle.sha256 == sha256_hex(bundle.bytes));
    const auto manifest = validate_bundle_archive(bundle.bytes);
    for (const auto& asset : manifest["assets"]) CHECK(asset["keyword"] != "garden path");
    for (const auto& popup : manifest["popups"]) CHECK(popup["keyword"] != "garden path");
    const auto status = service.status(id);
    CHECK(status["state"] == "ready");
    CHECK(status["step_timestamps"].size() == 9);  // every state but failed

    CHECK(code_of([&] { service.status("missing"); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { service.create_book("Blank", "  \n\t "); }) == ErrorCode::EmptyStory);
    CHECK(code_of([&] { service.create_book_from_image("Scan", "png bytes"); }) == ErrorCode::Config);
}

TEST_CASE("identical runs give identical bundles; resubmissions get new ids") {
    TempDir a("bookforge-service-det-a");
    TempDir b("bookforge-service-det-b");
    std::string first_sha;
    std::string first_id;
    for (const auto* dir : {&a, &b}) {
        auto providers = make_providers(golden_config());
        PipelineService service(providers, {dir->path});
        const auto id = service.create_book("Goldilocks", story()).book_id;
        REQUIRE(service.wait_until_settled(id, 20s) == RunState::AwaitingReview);
        service.complete_review(id);
        REQUIRE(service.wait_until_settled(id, 20s) == RunState::Ready);
        const auto sha = service.download_bundle(id).sha256;
        if (first_sha.empty()) {
            first_sha = sha;
            first_id = id;
            const auto again = service.create_book("Goldilocks", story()).book_id;
            CHECK(again != id);
            CHECK(service.list_books().front().book_id == again);
        } else {
            CHECK(sha == first_sha);
            CHECK(id == first_id);
        }
    }
}

TEST_CASE("keeping a suspicious model puts it in the bundle") {
    TempDir dir("bookforge-service-keep");
    auto providers = make_providers(golden_config());
    PipelineService service(providers, {dir.path});
    const auto id = service.create_book("Goldilocks", story()).book_id;
    REQUIRE(service.wait_until_settled(id, 20s) == RunState::AwaitingReview);
    const auto item = service.review_items(id).at(0);
    const auto record = service.post_verdict(id, item.asset_id, ReviewAction::Keep);
    CHECK(record.verdict == Verdict::Kept);
    CHECK(record.decided_by == DecidedBy::Human);
    service.complete_review(id);
    REQUIRE(service.wait_until_settled(id, 20s) == RunState::Ready);
    const auto manifest = nlohmann::json::parse(service.manifest_json(id));
    std::set<std::string> keywords;
    for (const auto& asset : manifest["assets"]) keywords.insert(asset["keyword"]);
    CHECK(keywords.count("garden path") == 1);
}

TEST_CASE("a book with nothing above the threshold skips review, and removing all fails") {
    TempDir dir("bookforge-service-empty");
    auto config = golden_config();
    config.set("scorer.default", "0.9");
    config.set("scorer.scores.garden path", "0.9");
    auto providers = make_providers(config);
    PipelineService service(providers, {dir.path});
    const auto id = service.create_book("Goldilocks", story()).book_id;
    CHECK(service.wait_until_settled(id, 20s) == RunState::Ready);
    CHECK(service.status(id)["step_timestamps"].count("awaiting_review") == 0);

    TempDir dir2("bookforge-service-empty2");
    auto config2 = golden_config();
    config2.set("scorer.default", "0.1");
    config2.set("scorer.scores.garden path", "0.1");
    config2.set("scorer.scores.porridge", "0.1");
    auto providers2 = make_providers(config2);
    PipelineService service2(providers2, {dir2.path});
    const auto id2 = service2.create_book("Goldilocks", story()).book_id;
    REQUIRE(service2.wait_until_settled(id2, 20s) == RunState::AwaitingReview);
    service2.complete_review(id2);
    REQUIRE(service2.wait_until_settled(id2, 20s) == RunState::Failed);
    CHECK(service2.status(id2)["error"]["code"] == "EmptyBook");
}

TEST_CASE("a language model outage fails the book at extraction") {
    TempDir dir("bookforge-service-down");
    auto providers = make_providers(golden_config());
    dynamic_cast<ScriptedLanguageModel&>(*providers.language_model).set_down(true);
    PipelineService service(providers, {dir.path});
    const auto id = service.create_book("Goldilocks", story()).book_id;
    REQUIRE(service.wait_until_settled(id, 20s) == RunState::Failed);
    const auto status = service.status(id);
    CHECK(status["error"]["code"] == "ProviderUnavailable");
    CHECK(status["step_timestamps"].count("extracting") == 1);
    CHECK(status["step_timestamps"].count("contextualizing") == 0);
}

TEST_CASE("a restarted service resumes without repeating paid calls") {
    TempDir dir("bookforge-service-resume");
    auto config = golden_config();
    config.set("mesh.latency_ms", "400");
    config.set("forge.parallelism", "2");
    config.set("mock.call_log", (dir.path / "calls.log").string());
    std::string id;
    {
        auto providers = make_providers(config);
        PipelineService service(providers, {dir.path / "data"});
        id = service.create_book("Goldilocks", story()).book_id;
        for (int i = 0; i < 2000 && service.summary(id).state != RunState::Generating; ++i) std::this_thread::sleep_for(5ms);
        REQUIRE(service.summary(id).state == RunState::Generating);
        std::this_thread::sleep_for(100ms);
        service.shutdown();
    }
    {
        auto providers = make_providers(config);
        PipelineService service(providers, {dir.path / "data"});
        CHECK(service.list_books().size() == 1);
        REQUIRE(service.wait_until_settled(id, 30s) == RunState::AwaitingReview);
        service.complete_review(id);
        REQUIRE(service.wait_until_settled(id, 20s) == RunState::Ready);
    }
    std::map<std::string, int> counts;
    for (const auto& line : CallLog(dir.path / "calls.log").lines()) ++counts[line];
    CHECK(counts.size() > 10);
    for (const auto& [line, n] : counts) CHECK_MESSAGE(n == 1, line);

    // a third start finds nothing to do
    auto providers = make_providers(config);
    PipelineService service(providers, {dir.path / "data"});
    CHECK(service.summary(id).state == RunState::Ready);
}
