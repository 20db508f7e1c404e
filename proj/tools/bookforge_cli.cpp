// bookforge: offline builds, threshold evaluation, and the HTTP service.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include "bookforge/api.hpp"
#include "bookforge/bundle.hpp"
#include "bookforge/config.hpp"
#include "bookforge/error.hpp"
#include "bookforge/gate.hpp"
#include "bookforge/service.hpp"
#include "bookforge/store.hpp"

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>
#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bookforge;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void report(const std::string& code, const std::string& message) {
    std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

KeyValueConfig load_config(const std::string& path) {
    if (path.empty()) throw UsageError("--providers is required");
    if (!fs::exists(path)) throw UsageError("providers config not found: " + path);
    auto config = KeyValueConfig::load(path);
    apply_environment(config);
    return config;
}

// ---- build ----

struct BuildArgs {
    std::string title;
    std::string input;
    std::string providers;
    std::string out;
    std::string review_policy = "remove-all";
    std::string language = "en";
    std::string state_dir;
};

void resolve_review(PipelineService& service, const std::string& book_id, const std::string& policy) {
    for (const auto& item : service.review_items(book_id)) {
        if (item.verdict != Verdict::Suspicious) continue;
        ReviewAction action = ReviewAction::Remove;
        if (policy == "keep-all") {
            action = ReviewAction::Keep;
        } else if (policy == "interactive") {
            std::cerr << "suspicious model '" << item.keyword << "' (score " << item.score << "), keep or remove? [remove] "
                      << std::flush;
            std::string answer;
            if (std::getline(std::cin, answer) && (answer == "keep" || answer == "k" || answer == "y")) {
                action = ReviewAction::Keep;
            }
        } else {
            continue;  // remove-all: completion removes every undecided model
        }
        service.post_verdict(book_id, item.asset_id, action);
    }
    service.complete_review(book_id);
}

int cmd_build(const BuildArgs& args) {
    if (!fs::exists(args.input)) throw UsageError("input file not found: " + args.input);
    auto config = load_config(args.providers);
    const std::string body = read_file(args.input);

    const bool scratch = args.state_dir.empty();
    const fs::path state_dir =
        scratch ? fs::temp_directory_path() / ("bookforge-build-" + std::to_string(::getpid())) : fs::path(args.state_dir);
    if (scratch) fs::remove_all(state_dir);

    int code = kFailure;
    {
        auto providers = make_providers(config);
        PipelineService service(providers, {state_dir});
        const auto created = service.create_book(args.title, body, args.language);
        const std::string id = created.book_id;
        const auto limit = std::chrono::hours(24);
        RunState state = service.wait_until_settled(id, limit);
        if (state == RunState::AwaitingReview) {
            resolve_review(service, id, args.review_policy);
            while ((state = service.wait_until_settled(id, limit)) == RunState::Assembling) {
            }
        }
        const json status = service.status(id);
        if (state == RunState::Ready) {
            const auto bundle = service.download_bundle(id);
            fs::create_directories(args.out);
            for (const auto& [name, bytes] : unzip_store(bundle.bytes)) write_file_atomic(fs::path(args.out) / name, bytes);
            std::cout << json{{"book_id", id},
                              {"state", "ready"},
                              {"out", args.out},
                              {"bundle_sha256", bundle.sha256},
                              {"models", status["assets"]}}
                             .dump()
                      << "\n";
            code = kOk;
        } else if (status.contains("error")) {
            report(status["error"]["code"], status["error"]["message"]);
        } else {
            report("Internal", "book stopped in state " + std::string(to_string(state)));
        }
    }
    if (scratch) fs::remove_all(state_dir);
    return code;
}

// ---- eval-thresholds ----

std::string percent(double p) {
    std::ostringstream out;
    const double scaled = p * 100.0;
    if (std::abs(scaled - std::round(scaled)) < 1e-9) {
        out << static_cast<long>(std::llround(scaled)) << "%";
    } else {
        out.setf(std::ios::fixed);
        out.precision(1);
        out << scaled << "%";
    }
    return out.str();
}

std::vector<double> parse_thresholds(const std::string& list) {
    std::vector<double> out;
    std::stringstream in(list);
    for (std::string item; std::getline(in, item, ',');) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("bad threshold '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError("no thresholds given");
    return out;
}

int cmd_eval(const std::string& pairs_file, const std::string& thresholds, const std::string& format) {
    if (!fs::exists(pairs_file)) throw UsageError("pairs file not found: " + pairs_file);
    std::vector<LabeledPair> pairs;
    try {
        pairs = parse_labeled_pairs(read_file(pairs_file));
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (pairs.empty()) throw UsageError("pairs file has no rows: " + pairs_file);
    std::vector<ThresholdRow> rows;
    try {
        rows = evaluate_thresholds(pairs, parse_thresholds(thresholds));
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (format == "csv") {
        std::cout << "threshold,proportion,count\n";
        for (const auto& row : rows) {
            std::cout << row.threshold << ",";
            if (row.proportion_plausible) std::cout << *row.proportion_plausible;
            std::cout << "," << row.count << "\n";
        }
    } else {
        std::printf("%-10s %-11s %s\n", "threshold", "proportion", "count");
        for (const auto& row : rows) {
            std::ostringstream c;
            c << row.threshold;
            const std::string p = row.proportion_plausible ? percent(*row.proportion_plausible) : "n/a";
            std::printf("%-10s %-11s %zu\n", c.str().c_str(), p.c_str(), row.count);
        }
    }
    return kOk;
}

// ---- serve ----

int cmd_serve(const std::string& addr, std::string data_dir, const std::string& providers_file) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw UsageError("--addr must be host:port");
    const std::string host = addr.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(addr.substr(colon + 1));
    } catch (const std::exception&) {
        throw UsageError("bad port in --addr " + addr);
    }
    if (data_dir.empty()) {
        const char* env = std::getenv("BOOKFORGE_DATA_DIR");
        data_dir = env && *env ? env : "bookforge-data";
    }
    std::string providers_path = providers_file;
    if (providers_path.empty()) {
        if (const char* env = std::getenv("BOOKFORGE_PROVIDERS")) providers_path = env;
    }
    auto config = load_config(providers_path);

    // SIGINT/SIGTERM are taken synchronously by a watcher thread.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto providers = make_providers(config);
    PipelineService service(providers, {data_dir});
    ApiServer api(service);
    if (!api.bind(host, port)) {
        report("Io", "cannot listen on " + addr + " (address in use?)");
        return kFailure;
    }
    std::cerr << "listening on http://" << host << ":" << api.port() << "\n" << std::flush;

    std::jthread watcher([&] {
        int received = 0;
        sigwait(&signals, &received);
        api.stop();
    });
    api.serve();
    service.shutdown();
    std::cerr << "stopped\n";
    // Wakes the watcher if the server stopped for another reason; the signal
    // stays blocked, so it cannot terminate the process.
    ::kill(::getpid(), SIGTERM);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Turns stories into AR books: entity extraction, 3D models, review and bundling."};
    app.require_subcommand(1);

    BuildArgs build;
    auto* build_cmd = app.add_subcommand("build", "Run the whole pipeline on one story and write its bundle");
    build_cmd->add_option("--title", build.title, "Book title")->required();
    build_cmd->add_option("--input", build.input, "Story text file (UTF-8)")->required();
    build_cmd->add_option("--providers", build.providers, "Provider config file")->required();
    build_cmd->add_option("--out", build.out, "Output directory for the bundle")->required();
    build_cmd->add_option("--review-policy", build.review_policy, "How suspicious models are resolved")
        ->check(CLI::IsMember({"keep-all", "remove-all", "interactive"}));
    build_cmd->add_option("--language", build.language, "Language tag of the story");
    build_cmd->add_option("--state-dir", build.state_dir, "Keep pipeline state here instead of a scratch directory");

    std::string pairs_file;
    std::string thresholds = "0.9,0.8,0.7,0.6";
    std::string format = "table";
    auto* eval_cmd = app.add_subcommand("eval-thresholds", "Share of plausible models above each threshold");
    eval_cmd->add_option("--pairs", pairs_file, "CSV of keyword,score,label")->required();
    eval_cmd->add_option("--thresholds", thresholds, "Comma-separated thresholds, descending");
    eval_cmd->add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));

    std::string addr = "127.0.0.1:8080";
    std::string data_dir;
    std::string providers_file;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the /v1 HTTP API");
    serve_cmd->add_option("--addr", addr, "host:port to listen on (port 0 picks a free one)");
    serve_cmd->add_option("--data-dir", data_dir, "State directory (default $BOOKFORGE_DATA_DIR or ./bookforge-data)");
    serve_cmd->add_option("--providers", providers_file, "Provider config file (default $BOOKFORGE_PROVIDERS)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*build_cmd) return cmd_build(build);
        if (*eval_cmd) return cmd_eval(pairs_file, thresholds, format);
        if (*serve_cmd) return cmd_serve(addr, data_dir, providers_file);
    } catch (const UsageError& e) {
        report("Usage", e.what());
        return kUsage;
    } catch (const Error& e) {
        report(std::string(to_string(e.code())), e.what());
        return e.code() == ErrorCode::Config ? kUsage : kFailure;
    } catch (const std::exception& e) {
        report("Internal", e.what());
        return kFailure;
    }
    return kUsage;
}
