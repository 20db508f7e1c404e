#include "bookforge/api.hpp"

#include "bookforge/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <sys/socket.h>

namespace bookforge {

using nlohmann::json;

int http_status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound:
        case ErrorCode::UnknownAsset: return 404;
        case ErrorCode::WrongState:
        case ErrorCode::VerdictConflict: return 409;
        case ErrorCode::EmptyStory:
        case ErrorCode::InvalidArgument: return 400;
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::ScorerUnavailable:
        case ErrorCode::TtsUnavailable: return 503;
        default: return 500;
    }
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, {{"error", {{"code", code}, {"message", message}}}}, status);
}

// Runs a handler, mapping exceptions to JSON error replies.
template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const Error& e) {
            send_error(res, http_status_for(e.code()), std::string(to_string(e.code())), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "InvalidArgument", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "Internal", e.what());
        }
    };
}

json parse_body(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
    return body;
}

std::string string_field(const json& body, const char* key, bool required, const std::string& fallback = {}) {
    if (!body.contains(key)) {
        if (required) throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + key + "'");
        return fallback;
    }
    if (!body[key].is_string()) throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "' must be a string");
    return body[key].get<std::string>();
}

}  // namespace

ApiServer::ApiServer(PipelineService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;
    // The library default is SO_REUSEPORT, which would let a second server
    // share a port that is already taken.
    s.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    s.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Post("/v1/books", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const auto summary = service_.create_book(string_field(body, "title", true), string_field(body, "body", true),
                                                  string_field(body, "language", false, "en"));
        send_json(res, to_json(summary), 201);
    }));
    s.Get("/v1/books", guarded([this](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& book : service_.list_books()) out.push_back(to_json(book));
        send_json(res, out);
    }));
    s.Get(R"(/v1/books/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, service_.status(req.matches[1]));
    }));
    s.Get(R"(/v1/books/([^/]+)/review)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const auto status = service_.status(id);
        json items = json::array();
        for (const auto& item : service_.review_items(id)) items.push_back(to_json(item));
        send_json(res, {{"book_id", id}, {"state", status["state"]}, {"items", items}});
    }));
    s.Post(R"(/v1/books/([^/]+)/review/complete)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto summary = service_.complete_review(req.matches[1]);
        send_json(res, {{"auto_plausible", summary.auto_plausible},
                        {"kept", summary.kept},
                        {"removed", summary.removed},
                        {"newly_defaulted", summary.newly_defaulted},
                        {"state", service_.status(req.matches[1])["state"]}});
    }));
    s.Post(R"(/v1/books/([^/]+)/review/([^/]+)/verdict)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        const auto action = review_action_from_string(string_field(body, "verdict", true));
        send_json(res, to_json(service_.post_verdict(req.matches[1], req.matches[2], action)));
    }));
    s.Get(R"(/v1/books/([^/]+)/bundle)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto bundle = service_.download_bundle(req.matches[1]);
        res.set_header("ETag", "\"" + bundle.sha256 + "\"");
        res.set_header("X-Bundle-SHA256", bundle.sha256);
        res.set_header("Content-Disposition", "attachment; filename=\"" + std::string(req.matches[1]) + ".zip\"");
        res.set_content(std::move(bundle.bytes), "application/zip");
    }));
    s.Get(R"(/v1/books/([^/]+)/assets/([^/]+)/frontal)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        res.set_content(service_.frontal_view(req.matches[1], req.matches[2]), "image/png");
    }));
    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "NotFound" : "Error", "no such route");
    });
}

ApiServer::~ApiServer() { stop(); }

bool ApiServer::bind(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        return port_ > 0;
    }
    if (!server_->bind_to_port(host, port)) return false;
    port_ = port;
    return true;
}

void ApiServer::serve() { server_->listen_after_bind(); }

void ApiServer::stop() {
    if (server_) server_->stop();
}

}  // namespace bookforge
