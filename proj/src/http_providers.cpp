#include "bookforge/http_providers.hpp"

#include "bookforge/error.hpp"

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>

namespace bookforge {

using nlohmann::json;

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

double normalize_cosine(double cosine) { return std::clamp((cosine + 1.0) / 2.0, 0.0, 1.0); }

namespace {

struct Target {
    std::string origin;
    std::string path;
};

Target split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error(ErrorCode::Config, "provider URL needs a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

std::string join_path(const std::string& base, const std::string& tail) {
    if (base.empty() || base == "/") return tail;
    return (base.back() == '/' ? base.substr(0, base.size() - 1) : base) + tail;
}

httplib::Client make_client(const Endpoint& endpoint, const std::string& origin) {
    httplib::Client client(origin);
    client.set_connection_timeout(endpoint.timeout);
    client.set_read_timeout(endpoint.timeout);
    client.set_write_timeout(endpoint.timeout);
    if (!endpoint.token.empty()) client.set_bearer_token_auth(endpoint.token);
    return client;
}

httplib::Result checked(httplib::Result result, ErrorCode unavailable, const std::string& what) {
    if (!result) throw Error(unavailable, what + ": " + httplib::to_string(result.error()));
    if (result->status >= 500 || result->status == 429) {
        throw Error(unavailable, what + ": HTTP " + std::to_string(result->status));
    }
    return result;
}

json parse_reply(const std::string& body, ErrorCode code, const std::string& what) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(code, what + " returned a non-JSON reply");
    return j;
}

}  // namespace

std::string HttpLanguageModel::complete(const LanguageModelRequest& request) {
    const auto target = split_url(endpoint_.url);
    auto client = make_client(endpoint_, target.origin);
    const json body = {{"step", request.step},
                       {"instruction", request.instruction},
                       {"story", request.story},
                       {"context", request.context}};
    auto result = checked(client.Post(target.path, body.dump(), "application/json"), ErrorCode::ProviderUnavailable,
                          "language model");
    if (result->status != 200) {
        throw Error(ErrorCode::ProviderUnavailable, "language model: HTTP " + std::to_string(result->status));
    }
    const json reply = parse_reply(result->body, ErrorCode::MalformedOutput, "language model");
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw Error(ErrorCode::MalformedOutput, "language model reply lacks 'text'");
    }
    return reply["text"].get<std::string>();
}

std::string HttpMeshGenerator::submit(const std::string& prompt) {
    const auto target = split_url(endpoint_.url);
    auto client = make_client(endpoint_, target.origin);
    auto result = checked(client.Post(join_path(target.path, "/jobs"), json{{"prompt", prompt}}.dump(), "application/json"),
                          ErrorCode::ProviderUnavailable, "mesh generator");
    if (result->status == 400 || result->status == 422) {
        throw Error(ErrorCode::ProviderRejectedPrompt, "mesh generator rejected prompt: " + result->body);
    }
    if (result->status / 100 != 2) {
        throw Error(ErrorCode::ProviderUnavailable, "mesh generator: HTTP " + std::to_string(result->status));
    }
    const json reply = parse_reply(result->body, ErrorCode::ProviderUnavailable, "mesh generator");
    if (!reply.contains("job_id") || !reply["job_id"].is_string()) {
        throw Error(ErrorCode::ProviderUnavailable, "mesh generator reply lacks 'job_id'");
    }
    return reply["job_id"].get<std::string>();
}

JobPoll HttpMeshGenerator::poll(const std::string& job_id) {
    const auto target = split_url(endpoint_.url);
    auto client = make_client(endpoint_, target.origin);
    auto result = checked(client.Get(join_path(target.path, "/jobs/" + job_id)), ErrorCode::ProviderUnavailable,
                          "mesh generator");
    if (result->status != 200) {
        throw Error(ErrorCode::ProviderUnavailable, "mesh generator poll: HTTP " + std::to_string(result->status));
    }
    const json reply = parse_reply(result->body, ErrorCode::ProviderUnavailable, "mesh generator");
    const std::string status = reply.value("status", "");
    JobPoll poll;
    poll.message = reply.value("message", "");
    if (status == "queued") {
        poll.state = JobState::Queued;
    } else if (status == "running") {
        poll.state = JobState::Running;
    } else if (status == "failed") {
        poll.state = JobState::Failed;
    } else if (status == "rejected") {
        poll.state = JobState::Rejected;
    } else if (status == "succeeded") {
        poll.state = JobState::Succeeded;
    } else {
        throw Error(ErrorCode::ProviderUnavailable, "mesh generator returned status '" + status + "'");
    }
    if (poll.state != JobState::Succeeded) return poll;

    auto fetch = [&](const std::string& url) {
        const Target where = url.find("://") == std::string::npos ? Target{target.origin, join_path(target.path, url)}
                                                                   : split_url(url);
        auto c = make_client(endpoint_, where.origin);
        auto r = checked(c.Get(where.path), ErrorCode::ProviderUnavailable, "artifact fetch");
        if (r->status != 200) throw Error(ErrorCode::ProviderUnavailable, "artifact fetch: HTTP " + std::to_string(r->status));
        return r->body;
    };
    if (!reply.contains("mesh_url")) throw Error(ErrorCode::ProviderUnavailable, "finished job lacks 'mesh_url'");
    poll.mesh_glb = fetch(reply["mesh_url"].get<std::string>());
    if (reply.contains("frontal_view_url") && reply["frontal_view_url"].is_string()) {
        poll.frontal_png = fetch(reply["frontal_view_url"].get<std::string>());
    }
    return poll;
}

double HttpSimilarityScorer::score(std::string_view png, const std::string& text) {
    const auto target = split_url(endpoint_.url);
    auto client = make_client(endpoint_, target.origin);
    const json body = {{"image_base64", base64_encode(png)}, {"text", text}};
    auto result = checked(client.Post(target.path, body.dump(), "application/json"), ErrorCode::ScorerUnavailable,
                          "similarity scorer");
    if (result->status != 200) {
        throw Error(ErrorCode::ScorerUnavailable, "similarity scorer: HTTP " + std::to_string(result->status));
    }
    const json reply = parse_reply(result->body, ErrorCode::ScorerUnavailable, "similarity scorer");
    if (!reply.contains("similarity") || !reply["similarity"].is_number()) {
        throw Error(ErrorCode::ScorerUnavailable, "similarity scorer reply lacks 'similarity'");
    }
    return normalize_cosine(reply["similarity"].get<double>());
}

std::string HttpSpeechSynthesizer::synthesize(const std::string& text, const std::string& language) {
    const auto target = split_url(endpoint_.url);
    auto client = make_client(endpoint_, target.origin);
    auto result = checked(client.Post(target.path, json{{"text", text}, {"language", language}}.dump(), "application/json"),
                          ErrorCode::TtsUnavailable, "speech synthesizer");
    if (result->status != 200) {
        throw Error(ErrorCode::TtsUnavailable, "speech synthesizer: HTTP " + std::to_string(result->status));
    }
    return result->body;
}

std::string HttpTextRecognizer::recognize(std::string_view image) {
    const auto target = split_url(endpoint_.url);
    auto client = make_client(endpoint_, target.origin);
    auto result = checked(client.Post(target.path, std::string(image), "application/octet-stream"),
                          ErrorCode::ProviderUnavailable, "text recognizer");
    const json reply = parse_reply(result->body, ErrorCode::ProviderUnavailable, "text recognizer");
    return reply.value("text", "");
}

}  // namespace bookforge
