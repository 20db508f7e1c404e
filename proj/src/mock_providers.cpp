#include "bookforge/mock_providers.hpp"

#include "bookforge/error.hpp"
#include "bookforge/ingest.hpp"
#include "bookforge/media.hpp"
#include "bookforge/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>

namespace bookforge {

void CallLog::record(const std::string& line) {
    if (file_.empty()) return;
    std::lock_guard lock(mutex_);
    const int fd = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::Io, "cannot open call log " + file_.string());
    const std::string text = line + "\n";
    const auto written = ::write(fd, text.data(), text.size());
    ::fsync(fd);
    ::close(fd);
    if (written != static_cast<ssize_t>(text.size())) throw Error(ErrorCode::Io, "call log write failed");
}

std::vector<std::string> CallLog::lines() const {
    std::vector<std::string> out;
    if (file_.empty()) return out;
    std::ifstream in(file_);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::unique_ptr<ScriptedLanguageModel> ScriptedLanguageModel::from_fixture(const nlohmann::json& fixture,
                                                                          CallLog* log) {
    auto model = std::make_unique<ScriptedLanguageModel>();
    model->log_ = log;
    for (int step = 1; step <= 4; ++step) {
        const std::string key = "step" + std::to_string(step);
        if (!fixture.contains(key)) continue;
        const auto& reply = fixture.at(key);
        model->set_reply(step, reply.is_string() ? reply.get<std::string>() : reply.dump());
    }
    return model;
}

void ScriptedLanguageModel::set_reply(int step, std::string reply) {
    std::lock_guard lock(mutex_);
    replies_[step] = std::move(reply);
}

void ScriptedLanguageModel::push_fault(int step, Fault fault, int times) {
    std::lock_guard lock(mutex_);
    for (int i = 0; i < times; ++i) faults_[step].push_back(fault);
}

std::string ScriptedLanguageModel::complete(const LanguageModelRequest& request) {
    std::lock_guard lock(mutex_);
    ++calls_[request.step];
    requests_.push_back(request);
    if (log_) log_->record("llm step" + std::to_string(request.step));
    if (down_) throw Error(ErrorCode::ProviderUnavailable, "scripted language model is down");
    auto& faults = faults_[request.step];
    if (!faults.empty()) {
        const Fault fault = faults.front();
        faults.pop_front();
        if (fault == Fault::Unavailable) throw Error(ErrorCode::ProviderUnavailable, "scripted outage");
        return "this is not json {";
    }
    auto it = replies_.find(request.step);
    if (it == replies_.end()) throw Error(ErrorCode::ProviderUnavailable, "no scripted reply for step " + std::to_string(request.step));
    return it->second;
}

int ScriptedLanguageModel::calls(int step) const {
    std::lock_guard lock(mutex_);
    auto it = calls_.find(step);
    return it == calls_.end() ? 0 : it->second;
}

std::vector<LanguageModelRequest> ScriptedLanguageModel::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

namespace {

bool starts_with_any(const std::string& text, const std::vector<std::string>& prefixes) {
    return std::any_of(prefixes.begin(), prefixes.end(), [&](const auto& p) { return text.rfind(p, 0) == 0; });
}

std::int64_t steady_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

}  // namespace

std::string MockMeshGenerator::submit(const std::string& prompt) {
    if (log_) log_->record("mesh submit " + sha256_hex(prompt).substr(0, 16));
    if (options_.down) throw Error(ErrorCode::ProviderUnavailable, "mock mesh generator is down");
    if (starts_with_any(prompt, options_.reject)) throw Error(ErrorCode::ProviderRejectedPrompt, "prompt rejected");
    ++submissions_;
    const int now = ++in_flight_;
    for (int seen = max_in_flight_; now > seen && !max_in_flight_.compare_exchange_weak(seen, now);) {
    }
    const std::string id = "job-" + sha256_hex(prompt).substr(0, 12) + "-" + std::to_string(steady_ms());
    std::lock_guard lock(mutex_);
    prompts_[id] = prompt;
    return id;
}

JobPoll MockMeshGenerator::poll(const std::string& job_id) {
    if (options_.down) throw Error(ErrorCode::ProviderUnavailable, "mock mesh generator is down");
    const auto dash = job_id.rfind('-');
    if (job_id.rfind("job-", 0) != 0 || dash == std::string::npos || dash < 5) {
        throw Error(ErrorCode::NotFound, "unknown job " + job_id);
    }
    const std::string prompt_hash = job_id.substr(4, dash - 4);
    const std::int64_t submitted = std::stoll(job_id.substr(dash + 1));

    std::string prompt;
    {
        std::lock_guard lock(mutex_);
        auto it = prompts_.find(job_id);
        if (it != prompts_.end()) prompt = it->second;
    }
    if (!prompt.empty() && starts_with_any(prompt, options_.never_finish)) return {JobState::Running, {}, {}, {}};
    if (steady_ms() - submitted < options_.latency.count()) return {JobState::Running, {}, {}, {}};

    // Box proportions from the prompt hash keep distinct keywords distinct.
    const auto dims = [&](std::size_t at) {
        return 0.5f + static_cast<float>(std::stoi(prompt_hash.substr(at, 2), nullptr, 16)) / 255.0f;
    };
    JobPoll done{JobState::Succeeded, make_box_glb(dims(0), dims(2), dims(4)), std::nullopt, {}};
    if (options_.provide_frontal) done.frontal_png = render_frontal_view(parse_glb(done.mesh_glb), 64);
    {
        std::lock_guard lock(mutex_);
        if (!finished_[job_id]) {
            finished_[job_id] = true;
            if (prompts_.count(job_id)) --in_flight_;
        }
    }
    return done;
}

void MockSimilarityScorer::set_score(const std::string& keyword, double score) {
    std::lock_guard lock(mutex_);
    by_keyword_[case_fold(keyword)] = score;
}

void MockSimilarityScorer::set_score_for_image(const std::string& keyword, const std::string& image_sha256,
                                               double score) {
    std::lock_guard lock(mutex_);
    by_image_[{case_fold(keyword), image_sha256}] = score;
}

double MockSimilarityScorer::score(std::string_view png, const std::string& text) {
    ++calls_;
    if (log_) log_->record("score " + text);
    if (down_) throw Error(ErrorCode::ScorerUnavailable, "mock scorer is down");
    const std::string key = case_fold(text);
    std::lock_guard lock(mutex_);
    if (!by_image_.empty()) {
        auto it = by_image_.find({key, sha256_hex(png)});
        if (it != by_image_.end()) return it->second;
    }
    auto it = by_keyword_.find(key);
    return it == by_keyword_.end() ? default_score_ : it->second;
}

std::string MockSpeechSynthesizer::synthesize(const std::string& text, const std::string& language) {
    ++calls_;
    if (log_) log_->record("tts " + sha256_hex(text).substr(0, 16));
    if (down_) throw Error(ErrorCode::TtsUnavailable, "mock speech synthesizer is down");
    constexpr std::uint32_t kRate = 8000;
    Rational seconds;
    if (fixed_) {
        seconds = *fixed_;
    } else {
        std::size_t words = 0;
        try {
            words = segment_words(text, language).size();
        } catch (const Error&) {
            words = 0;
        }
        seconds = Rational::of(static_cast<std::int64_t>(words) * seconds_per_word_.num, seconds_per_word_.den);
    }
    const auto samples = static_cast<std::uint32_t>(seconds.num * kRate / seconds.den);
    return make_silent_wav(samples, kRate);
}

}  // namespace bookforge
