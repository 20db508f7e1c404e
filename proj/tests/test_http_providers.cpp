#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include "bookforge/error.hpp"
#include "bookforge/http_providers.hpp"
#include "bookforge/media.hpp"

#include <functional>
#include <thread>

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

// A stand-in for all remote providers on one port.
struct FakeProviders {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::string last_auth;
    json last_body;
    int polls = 0;
    const std::string glb = make_box_glb(1, 2, 3);

    FakeProviders() {
        server.Post("/llm", [this](const httplib::Request& req, httplib::Response& res) {
            last_auth = req.get_header_value("Authorization");
            last_body = json::parse(req.body);
            res.set_content(json{{"text", "reply to step " + std::to_string(last_body["step"].get<int>())}}.dump(),
                            "application/json");
        });
        server.Post("/llm-broken", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"nope": 1})", "application/json");
        });
        server.Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
        server.Post("/mesh/jobs", [](const httplib::Request& req, httplib::Response& res) {
            const auto prompt = json::parse(req.body)["prompt"].get<std::string>();
            if (prompt.rfind("forbidden", 0) == 0) {
                res.status = 422;
                res.set_content("content policy", "text/plain");
                return;
            }
            res.set_content(json{{"job_id", "job-7"}}.dump(), "application/json");
        });
        server.Get("/mesh/jobs/job-7", [this](const httplib::Request&, httplib::Response& res) {
            const bool done = ++polls > 1;
            json reply = {{"status", done ? "succeeded" : "running"}};
            if (done) reply["mesh_url"] = "/files/job-7.glb";
            res.set_content(reply.dump(), "application/json");
        });
        server.Get("/mesh/files/job-7.glb", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(glb, "model/gltf-binary");
        });
        server.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
            last_body = json::parse(req.body);
            res.set_content(json{{"similarity", 0.4}}.dump(), "application/json");
        });
        server.Post("/tts", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(make_silent_wav(16000), "audio/wav");
        });
        server.Post("/ocr", [](const httplib::Request& req, httplib::Response& res) {
            res.set_content(json{{"text", "read " + std::to_string(req.body.size()) + " bytes"}}.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeProviders() {
        server.stop();
        thread.join();
    }

    Endpoint at(const std::string& path, const std::string& token = {}) const {
        Endpoint e;
        e.url = "http://127.0.0.1:" + std::to_string(port) + path;
        e.token = token;
        e.timeout = std::chrono::seconds(5);
        return e;
    }
};

}  // namespace

TEST_CASE("language model adapter") {
    FakeProviders fake;
    HttpLanguageModel llm(fake.at("/llm", "sekrit"));
    CHECK(llm.complete({2, "Describe the setting.", "Once upon a time", "{}"}) == "reply to step 2");
    CHECK(fake.last_auth == "Bearer sekrit");
    CHECK(fake.last_body["instruction"] == "Describe the setting.");
    CHECK(code_of([&] { HttpLanguageModel(fake.at("/llm-broken")).complete({1, "", "", "{}"}); }) == ErrorCode::MalformedOutput);
    CHECK(code_of([&] { HttpLanguageModel(fake.at("/down")).complete({1, "", "", "{}"}); }) == ErrorCode::ProviderUnavailable);
    Endpoint nowhere = fake.at("/llm");
    nowhere.url = "http://127.0.0.1:1/llm";
    CHECK(code_of([&] { HttpLanguageModel(nowhere).complete({1, "", "", "{}"}); }) == ErrorCode::ProviderUnavailable);
    nowhere.url = "127.0.0.1/llm";
    CHECK(code_of([&] { HttpLanguageModel(nowhere).complete({1, "", "", "{}"}); }) == ErrorCode::Config);
}

TEST_CASE("mesh generator adapter submits, polls and fetches") {
    FakeProviders fake;
    HttpMeshGenerator mesh(fake.at("/mesh"));
    const auto job = mesh.submit("teapot. a teapot.");
    CHECK(job == "job-7");
    CHECK(mesh.poll(job).state == JobState::Running);
    const auto done = mesh.poll(job);
    CHECK(done.state == JobState::Succeeded);
    CHECK(done.mesh_glb == fake.glb);
    CHECK_FALSE(done.frontal_png.has_value());
    CHECK(code_of([&] { mesh.submit("forbidden thing"); }) == ErrorCode::ProviderRejectedPrompt);
    CHECK(code_of([&] { HttpMeshGenerator(fake.at("/nothing")).poll("job-7"); }) == ErrorCode::ProviderUnavailable);
}

TEST_CASE("similarity, speech and text recognition adapters") {
    FakeProviders fake;
    CHECK(HttpSimilarityScorer(fake.at("/score")).score("PNGDATA", "a teapot") == doctest::Approx(0.7));
    CHECK(fake.last_body["image_base64"] == base64_encode("PNGDATA"));
    CHECK(fake.last_body["text"] == "a teapot");
    CHECK(code_of([&] { HttpSimilarityScorer(fake.at("/down")).score("x", "y"); }) == ErrorCode::ScorerUnavailable);

    const auto wav = HttpSpeechSynthesizer(fake.at("/tts")).synthesize("hello there", "en");
    CHECK(wav_duration_seconds(wav) == Rational::of(2, 1));
    CHECK(code_of([&] { HttpSpeechSynthesizer(fake.at("/down")).synthesize("x", "en"); }) == ErrorCode::TtsUnavailable);

    CHECK(HttpTextRecognizer(fake.at("/ocr")).recognize("12345") == "read 5 bytes");
}

TEST_CASE("helpers") {
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("Man") == "TWFu");
    CHECK(base64_encode("Ma") == "TWE=");
    CHECK(normalize_cosine(-1.0) == 0.0);
    CHECK(normalize_cosine(1.0) == 1.0);
    CHECK(normalize_cosine(0.0) == 0.5);
    CHECK(normalize_cosine(3.0) == 1.0);
}
