#include <doctest.h>

#include "bookforge/error.hpp"
#include "bookforge/mock_providers.hpp"
#include "bookforge/narrative.hpp"
#include "bookforge/store.hpp"

#include <functional>
#include <random>

using namespace bookforge;
using nlohmann::json;

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

json golden_fixture() {
    return json::parse(read_file(std::string(BOOKFORGE_FIXTURES) + "/golden/llm.json"));
}

StoryDocument golden_doc() {
    return make_document("b", "Goldilocks and the Three Bears",
                         read_file(std::string(BOOKFORGE_FIXTURES) + "/golden/story.txt"));
}

RetryPolicy fast(int attempts) { return {attempts, std::chrono::milliseconds(0)}; }

}  // namespace

TEST_CASE("extraction keeps the most salient entities and drops repeats") {
    const auto e = parse_extraction(R"({"entities":[
        {"name":"chair","kind":"object","salience":0.2},
        {"name":"Goldilocks","kind":"character","salience":0.9},
        {"name":"goldilocks","kind":"object","salience":0.1},
        {"name":"Bear","kind":"character","salience":0.5}]})");
    CHECK(e.characters == std::vector<std::string>{"Goldilocks", "Bear"});
    CHECK(e.objects == std::vector<std::string>{"chair"});

    json many = {{"entities", json::array()}};
    for (int i = 0; i < 40; ++i) many["entities"].push_back({{"name", "thing" + std::to_string(i)}, {"kind", "object"}, {"salience", i}});
    const auto capped = parse_extraction(many.dump());
    CHECK(capped.objects.size() == kMaxEntities);
    CHECK(capped.objects.front() == "thing39");
}

TEST_CASE("malformed replies") {
    for (const char* reply : {"", "not json", "[]", R"({"entities":[]})", R"({"entities":{}})",
                              R"({"entities":[{"name":"x","kind":"animal","salience":1}]})",
                              R"({"entities":[{"name":"","kind":"object","salience":1}]})",
                              R"({"entities":[{"name":"x","kind":"object"}]})"}) {
        CHECK(code_of([&] { parse_extraction(reply); }) == ErrorCode::MalformedOutput);
    }
    CHECK(code_of([] { parse_historical_context(R"({"era":"x","place":"y"})"); }) == ErrorCode::MalformedOutput);
    CHECK(code_of([] { parse_historical_context(R"({"era":"x","place":3,"cultural_notes":"z"})"); }) == ErrorCode::MalformedOutput);
}

TEST_CASE("character profiles fill gaps with the sentinel and reject strangers") {
    const auto profiles = parse_character_profiles(
        R"({"characters":[{"name":"Goldilocks","gender":"female","age":"","clothing":"dress"}]})", {"Goldilocks"});
    REQUIRE(profiles.size() == 1);
    CHECK(profiles[0].age == kUnspecified);
    CHECK(profiles[0].nationality == kUnspecified);
    CHECK(profiles[0].description() ==
          "gender: female; nationality: unspecified; age: unspecified; appearance: unspecified; clothing: dress; era of life: unspecified");
    CHECK(code_of([] { parse_character_profiles(R"({"characters":[{"name":"Wolf","gender":"male"}]})", {"Goldilocks"}); }) ==
          ErrorCode::SchemaViolation);
}

TEST_CASE("object profiles need both descriptions") {
    CHECK(code_of([] {
              parse_object_profiles(R"({"objects":[{"name":"chair","explanation":"a chair"}]})", {"chair"});
          }) == ErrorCode::MalformedOutput);
    const auto objects = parse_object_profiles(
        R"({"objects":[{"name":"chair","explanation":"a chair","context_description":"wooden"}]})", {"chair"});
    CHECK(objects[0].context_description == "wooden");
}

TEST_CASE("parsers never crash on mutated replies") {
    const auto fixture = golden_fixture();
    const std::vector<std::string> seeds = {fixture["step1"].dump(), fixture["step2"].dump(), fixture["step3"].dump(),
                                            fixture["step4"].dump()};
    const std::vector<std::string> names3 = {"Goldilocks", "Baby Bear", "Papa Bear", "Mama Bear"};
    const std::vector<std::string> names4 = {"porridge", "cottage", "chair", "bed", "garden path"};
    std::mt19937 rng(17);
    for (int trial = 0; trial < 4000; ++trial) {
        std::string reply = seeds[trial % 4];
        const int edits = std::uniform_int_distribution<int>(1, 6)(rng);
        for (int e = 0; e < edits && !reply.empty(); ++e) {
            const std::size_t at = std::uniform_int_distribution<std::size_t>(0, reply.size() - 1)(rng);
            switch (rng() % 3) {
                case 0: reply.erase(at, 1); break;
                case 1: reply.insert(at, 1, "{}[]\",:0a\\"[rng() % 10]); break;
                default: reply[at] = static_cast<char>(rng() % 128); break;
            }
        }
        try {
            switch (trial % 4) {
                case 0: parse_extraction(reply); break;
                case 1: parse_historical_context(reply); break;
                case 2: parse_character_profiles(reply, names3); break;
                default: parse_object_profiles(reply, names4); break;
            }
        } catch (const Error& e) {
            CHECK((e.code() == ErrorCode::MalformedOutput || e.code() == ErrorCode::SchemaViolation));
        }
    }
}

TEST_CASE("templates render every slot or refuse") {
    PromptTemplate t{1, "1", "Title: {{title}} / {{title}} {{schema}}", json::object()};
    CHECK(t.render({{"title", "T"}, {"schema", "{}"}}) == "Title: T / T {}");
    CHECK(code_of([&] { t.render({{"title", "T"}}); }) == ErrorCode::InvalidArgument);
    const auto library = PromptLibrary::builtin();
    CHECK(library.version() == "1.0.0");
    for (int step = 1; step <= 4; ++step) CHECK(library.step(step).step_id == step);
}

TEST_CASE("the golden catalog") {
    auto model = ScriptedLanguageModel::from_fixture(golden_fixture());
    NarrativePipeline pipeline(*model, fast(3));
    const auto catalog = pipeline.build_catalog(golden_doc());
    CHECK(catalog.characters.size() == 4);
    CHECK(catalog.objects.size() == 5);
    CHECK(catalog.characters[0].name == "Goldilocks");
    CHECK(catalog.historical_context.place == "a cottage at the edge of an English forest");
    for (int step = 1; step <= 4; ++step) CHECK(model->calls(step) == 1);

    // Step 3 sees names only; step 4 gets the setting.
    for (const auto& request : model->requests()) {
        const auto context = json::parse(request.context);
        if (request.step == 3) CHECK_FALSE(context.contains("historical_context"));
        if (request.step == 4) CHECK(context["historical_context"]["era"] == catalog.historical_context.era);
        CHECK(request.instruction.find("{{") == std::string::npos);
    }
}

TEST_CASE("retries share one budget") {
    const auto doc = golden_doc();
    for (int budget = 1; budget <= 4; ++budget) {
        for (int faults = 0; faults <= 5; ++faults) {
            for (auto fault : {ScriptedLanguageModel::Fault::Unavailable, ScriptedLanguageModel::Fault::Malformed}) {
                auto model = ScriptedLanguageModel::from_fixture(golden_fixture());
                model->push_fault(1, fault, faults);
                NarrativePipeline pipeline(*model, fast(budget));
                if (faults < budget) {
                    CHECK(pipeline.extract_entities(doc).characters.size() == 4);
                    CHECK(model->calls(1) == faults + 1);
                } else {
                    const auto expected = fault == ScriptedLanguageModel::Fault::Unavailable ? ErrorCode::ProviderUnavailable
                                                                                             : ErrorCode::MalformedOutput;
                    CHECK(code_of([&] { pipeline.extract_entities(doc); }) == expected);
                    CHECK(model->calls(1) == budget);
                }
            }
        }
    }
}

TEST_CASE("a re-ask carries a repair note") {
    auto model = ScriptedLanguageModel::from_fixture(golden_fixture());
    model->push_fault(2, ScriptedLanguageModel::Fault::Malformed, 1);
    NarrativePipeline pipeline(*model, fast(3));
    pipeline.infer_historical_context(golden_doc());
    const auto requests = model->requests();
    REQUIRE(requests.size() == 2);
    CHECK(requests[0].instruction.find("previous reply was rejected") == std::string::npos);
    CHECK(requests[1].instruction.find("previous reply was rejected") != std::string::npos);
}

TEST_CASE("schema violations are not retried") {
    auto model = ScriptedLanguageModel::from_fixture(golden_fixture());
    model->set_reply(3, R"({"characters":[{"name":"Big Bad Wolf","gender":"male"}]})");
    NarrativePipeline pipeline(*model, fast(3));
    CHECK(code_of([&] { pipeline.describe_characters(golden_doc(), {"Goldilocks"}); }) == ErrorCode::SchemaViolation);
    CHECK(model->calls(3) == 1);
}

TEST_CASE("empty name lists skip the call") {
    auto model = ScriptedLanguageModel::from_fixture(golden_fixture());
    NarrativePipeline pipeline(*model, fast(3));
    CHECK(pipeline.describe_characters(golden_doc(), {}).empty());
    CHECK(model->calls(3) == 0);
}

TEST_CASE("a provider that is down fails the step") {
    auto model = ScriptedLanguageModel::from_fixture(golden_fixture());
    model->set_down(true);
    NarrativePipeline pipeline(*model, fast(2));
    CHECK(code_of([&] { pipeline.extract_entities(golden_doc()); }) == ErrorCode::ProviderUnavailable);
    CHECK(code_of([&] { NarrativePipeline(*model, fast(0)); }) == ErrorCode::Config);
}
