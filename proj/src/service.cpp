#include "bookforge/service.hpp"

#include "bookforge/bundle.hpp"
#include "bookforge/error.hpp"
#include "bookforge/ingest.hpp"

#include <algorithm>
#include <array>
#include <future>
#include <set>

namespace bookforge {

using nlohmann::json;

namespace {

constexpr std::array kRunStates = {
    RunState::Received,   RunState::Extracting,     RunState::Contextualizing, RunState::Describing,
    RunState::Generating, RunState::Scoring,        RunState::AwaitingReview,  RunState::Assembling,
    RunState::Ready,      RunState::Failed,
};

std::size_t order_of(RunState state) { return static_cast<std::size_t>(state); }

DecidedBy decided_by_from_string(std::string_view text) {
    if (text == to_string(DecidedBy::System)) return DecidedBy::System;
    if (text == to_string(DecidedBy::Human)) return DecidedBy::Human;
    throw Error(ErrorCode::InvalidArgument, "unknown decider '" + std::string(text) + "'");
}

json rational_to_json(const Rational& r) { return {{"num", r.num}, {"den", r.den}}; }
Rational rational_from_json(const json& j) { return Rational::of(j.at("num").get<std::int64_t>(), j.at("den").get<std::int64_t>()); }

std::string span_key(const PageLayout& page) {
    return std::to_string(page.start_word) + "-" + std::to_string(page.end_word);
}

bool settled(RunState state) {
    return state == RunState::AwaitingReview || state == RunState::Ready || state == RunState::Failed;
}

}  // namespace

std::string_view to_string(RunState state) {
    switch (state) {
        case RunState::Received: return "received";
        case RunState::Extracting: return "extracting";
        case RunState::Contextualizing: return "contextualizing";
        case RunState::Describing: return "describing";
        case RunState::Generating: return "generating";
        case RunState::Scoring: return "scoring";
        case RunState::AwaitingReview: return "awaiting_review";
        case RunState::Assembling: return "assembling";
        case RunState::Ready: return "ready";
        case RunState::Failed: return "failed";
    }
    return "unknown";
}

RunState run_state_from_string(std::string_view text) {
    for (RunState state : kRunStates) {
        if (to_string(state) == text) return state;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown run state '" + std::string(text) + "'");
}

bool is_terminal(RunState state) { return state == RunState::Ready || state == RunState::Failed; }

bool is_legal_run_transition(RunState from, RunState to) {
    if (is_terminal(from)) return false;
    if (to == RunState::Failed) return true;
    if (from == RunState::Scoring && to == RunState::Assembling) return true;
    return order_of(to) == order_of(from) + 1;
}

std::string make_book_id(std::string_view title, std::string_view body, std::string_view language,
                         std::uint64_t ordinal) {
    std::string material;
    material.append(title).push_back('\0');
    material.append(language).push_back('\0');
    material.append(body);
    return sha256_hex(material).substr(0, 12) + "-" + std::to_string(ordinal);
}

json to_json(const PlausibilityRecord& r) {
    return {{"asset_id", r.asset_id},
            {"keyword", r.keyword_text},
            {"score", r.score},
            {"verdict", to_string(r.verdict)},
            {"decided_by", to_string(r.decided_by)},
            {"decided_at", r.decided_at}};
}

PlausibilityRecord plausibility_record_from_json(const json& j) {
    PlausibilityRecord r;
    r.asset_id = j.at("asset_id").get<std::string>();
    r.keyword_text = j.at("keyword").get<std::string>();
    r.score = j.at("score").get<double>();
    r.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    r.decided_by = decided_by_from_string(j.at("decided_by").get<std::string>());
    r.decided_at = j.at("decided_at").get<std::int64_t>();
    return r;
}

json to_json(const NarrationTrack& t) {
    return {{"page_index", t.page_index},
            {"audio_ref", t.audio_ref},
            {"duration_seconds", rational_to_json(t.duration_seconds)},
            {"speech_rate", rational_to_json(t.speech_rate)}};
}

NarrationTrack narration_track_from_json(const json& j) {
    NarrationTrack t;
    t.page_index = j.at("page_index").get<std::size_t>();
    t.audio_ref = j.at("audio_ref").get<std::string>();
    t.duration_seconds = rational_from_json(j.at("duration_seconds"));
    t.speech_rate = rational_from_json(j.at("speech_rate"));
    return t;
}

json to_json(const BookSummary& s) {
    json j = {{"book_id", s.book_id},
              {"title", s.title},
              {"state", to_string(s.state)},
              {"model_count", s.model_count},
              {"created_at", s.created_at}};
    if (s.eta_seconds) {
        j["eta_seconds"] = *s.eta_seconds;
        j["eta_provisional"] = s.eta_provisional;
    }
    return j;
}

json to_json(const ReviewItem& item) {
    return {{"asset_id", item.asset_id},
            {"keyword", item.keyword},
            {"score", item.score},
            {"verdict", to_string(item.verdict)},
            {"decided_by", to_string(item.decided_by)},
            {"frontal_view_url", item.frontal_view_url}};
}

struct PipelineService::Book {
    PipelineRun run;
    StoryDocument doc;
};

PipelineService::PipelineService(ProviderSet& providers, ServiceOptions options)
    : providers_(providers),
      options_(std::move(options)),
      blobs_(options_.data_dir / "blobs"),
      journal_(options_.data_dir / "journal.jsonl") {
    if (!providers_.language_model || !providers_.mesh_generator || !providers_.scorer || !providers_.speech) {
        throw Error(ErrorCode::Config, "every provider must be configured");
    }
    replay();
    if (options_.resume) {
        std::vector<std::shared_ptr<Book>> unfinished;
        {
            std::lock_guard lock(mutex_);
            for (const auto& [id, book] : books_) {
                if (!is_terminal(book->run.state) && book->run.state != RunState::AwaitingReview) unfinished.push_back(book);
            }
        }
        for (const auto& book : unfinished) start_worker(book);
    }
}

PipelineService::~PipelineService() { shutdown(); }

void PipelineService::shutdown() {
    std::list<std::jthread> workers;
    {
        std::lock_guard lock(workers_mutex_);
        shut_down_ = true;
        stop_.request_stop();
        workers.swap(workers_);
    }
    workers.clear();  // joins
    changed_.notify_all();
}

void PipelineService::replay() {
    std::lock_guard lock(mutex_);
    for (const auto& event : journal_.replay()) apply(event);
}

// Folds one journal event into memory. Caller holds mutex_.
void PipelineService::apply(const json& event) {
    const std::string type = event.at("type").get<std::string>();
    const std::string book_id = event.at("book_id").get<std::string>();
    if (type == "created") {
        auto book = std::make_shared<Book>();
        auto& run = book->run;
        run.book_id = book_id;
        run.title = event.at("title").get<std::string>();
        run.language = event.at("language").get<std::string>();
        run.body = event.at("body").get<std::string>();
        run.created_at = event.at("created_at").get<std::int64_t>();
        run.sequence = event.at("sequence").get<std::uint64_t>();
        run.step_timestamps[std::string(to_string(RunState::Received))] = run.created_at;
        run.review = ReviewBoard(providers_.gate);
        book->doc = make_document(run.book_id, run.title, run.body, run.language);
        next_sequence_ = std::max(next_sequence_, run.sequence + 1);
        books_[book_id] = std::move(book);
        changed_.notify_all();
        return;
    }
    auto it = books_.find(book_id);
    if (it == books_.end()) throw Error(ErrorCode::Io, "journal event for unknown book " + book_id);
    auto& run = it->second->run;
    if (type == "state") {
        run.state = run_state_from_string(event.at("state").get<std::string>());
        run.step_timestamps[std::string(to_string(run.state))] = event.at("at").get<std::int64_t>();
        if (event.contains("error")) {
            run.error_code = event.at("error_code").get<std::string>();
            run.error = event.at("error").get<std::string>();
        }
        changed_.notify_all();
    } else if (type == "entities") {
        run.entities = extracted_entities_from_json(event.at("value"));
    } else if (type == "context") {
        run.historical_context = historical_context_from_json(event.at("value"));
    } else if (type == "profiles") {
        std::vector<CharacterProfile> characters;
        for (const auto& c : event.at("characters")) characters.push_back(character_profile_from_json(c));
        std::vector<ObjectProfile> objects;
        for (const auto& o : event.at("objects")) objects.push_back(object_profile_from_json(o));
        run.characters = std::move(characters);
        run.objects = std::move(objects);
    } else if (type == "asset") {
        AssetRecord record = asset_record_from_json(event.at("record"));
        auto existing = std::find_if(run.assets.begin(), run.assets.end(),
                                     [&](const AssetRecord& a) { return a.asset_id == record.asset_id; });
        if (existing == run.assets.end()) {
            run.assets.push_back(std::move(record));
        } else {
            *existing = std::move(record);
        }
    } else if (type == "score" || type == "verdict") {
        run.review.restore(plausibility_record_from_json(event.at("record")));
    } else if (type == "review_complete") {
        run.review.complete_review(event.at("at").get<std::int64_t>());
    } else if (type == "narration") {
        run.narration[event.at("span").get<std::string>()] = narration_track_from_json(event.at("track"));
    } else if (type == "bundle") {
        run.bundle_ref = event.at("ref").get<std::string>();
        run.bundle_sha256 = event.at("sha256").get<std::string>();
    } else {
        throw Error(ErrorCode::Io, "unknown journal event '" + type + "'");
    }
}

// Durable first, then visible. Caller holds mutex_.
void PipelineService::record(const json& event) {
    journal_.append(event);
    apply(event);
}

void PipelineService::transition(Book& book, RunState to, const std::string& code, const std::string& message) {
    std::lock_guard lock(mutex_);
    const RunState from = book.run.state;
    if (from == to) return;
    if (!is_legal_run_transition(from, to)) {
        throw Error(ErrorCode::IllegalTransition,
                    "run " + book.run.book_id + ": " + std::string(to_string(from)) + " -> " + std::string(to_string(to)));
    }
    json event = {{"type", "state"}, {"book_id", book.run.book_id}, {"state", to_string(to)}, {"at", unix_now()}};
    if (to == RunState::Failed) {
        event["error_code"] = code;
        event["error"] = message;
    }
    record(event);
}

std::shared_ptr<PipelineService::Book> PipelineService::find_book(const std::string& book_id) const {
    std::lock_guard lock(mutex_);
    auto it = books_.find(book_id);
    if (it == books_.end()) throw Error(ErrorCode::NotFound, "no book " + book_id);
    return it->second;
}

void PipelineService::start_worker(const std::shared_ptr<Book>& book) {
    std::lock_guard lock(workers_mutex_);
    if (shut_down_) return;
    workers_.emplace_back([this, book] { drive(book, stop_.get_token()); });
}

void PipelineService::drive(const std::shared_ptr<Book>& book, std::stop_token stop) {
    try {
        while (!stop.stop_requested()) {
            RunState state;
            {
                std::lock_guard lock(mutex_);
                state = book->run.state;
            }
            switch (state) {
                case RunState::Received: transition(*book, RunState::Extracting); break;
                case RunState::Extracting:
                case RunState::Contextualizing:
                case RunState::Describing: run_narrative_steps(*book, state); break;
                case RunState::Generating:
                    if (!run_generation(*book, stop)) return;
                    break;
                case RunState::Scoring:
                    // Review completion starts a fresh worker; this one must
                    // not race it into assembly.
                    if (!run_scoring(*book)) return;
                    break;
                case RunState::Assembling: run_assembly(*book); break;
                case RunState::AwaitingReview:
                case RunState::Ready:
                case RunState::Failed: return;
            }
        }
    } catch (const Error& e) {
        transition(*book, RunState::Failed, std::string(to_string(e.code())), e.what());
    } catch (const std::exception& e) {
        transition(*book, RunState::Failed, "Internal", e.what());
    }
}

void PipelineService::run_narrative_steps(Book& book, RunState state) {
    NarrativePipeline narrative(*providers_.language_model, providers_.retry, providers_.prompts);
    PipelineRun snapshot;
    {
        std::lock_guard lock(mutex_);
        snapshot = book.run;
    }
    const std::string& id = snapshot.book_id;
    switch (state) {
        case RunState::Extracting:
            if (!snapshot.entities) {
                const auto entities = narrative.extract_entities(book.doc);
                std::lock_guard lock(mutex_);
                record({{"type", "entities"}, {"book_id", id}, {"value", to_json(entities)}});
            }
            transition(book, RunState::Contextualizing);
            break;
        case RunState::Contextualizing:
            if (!snapshot.historical_context) {
                const auto context = narrative.infer_historical_context(book.doc);
                std::lock_guard lock(mutex_);
                record({{"type", "context"}, {"book_id", id}, {"value", to_json(context)}});
            }
            transition(book, RunState::Describing);
            break;
        case RunState::Describing:
            if (!snapshot.characters || !snapshot.objects) {
                // Character profiles do not depend on the setting; both requests go out together.
                auto characters = std::async(std::launch::async, [&] {
                    return narrative.describe_characters(book.doc, snapshot.entities->characters);
                });
                const auto objects =
                    narrative.describe_objects(book.doc, snapshot.entities->objects, *snapshot.historical_context);
                const auto people = characters.get();
                json j_characters = json::array();
                for (const auto& c : people) j_characters.push_back(to_json(c));
                json j_objects = json::array();
                for (const auto& o : objects) j_objects.push_back(to_json(o));
                std::lock_guard lock(mutex_);
                record({{"type", "profiles"}, {"book_id", id}, {"characters", j_characters}, {"objects", j_objects}});
            }
            transition(book, RunState::Generating);
            break;
        default: break;
    }
}

bool PipelineService::run_generation(Book& book, std::stop_token stop) {
    std::vector<AssetRecord> assets;
    {
        std::lock_guard lock(mutex_);
        auto& run = book.run;
        if (run.assets.empty()) {
            const std::int64_t now = unix_now();
            std::set<std::string> seen;
            auto add = [&](const std::string& name, EntityKind kind, auto&& build) {
                if (!seen.insert(case_fold(name)).second) return;
                AssetRecord asset;
                asset.asset_id = make_asset_id(run.book_id, kind, name);
                asset.keyword = name;
                asset.created_at = asset.updated_at = now;
                try {
                    asset.prompt = build();
                } catch (const Error& e) {
                    asset.prompt.keyword = name;
                    asset.prompt.kind = kind;
                    asset.error = e.what();
                    asset.transition(AssetStatus::Failed, now);
                }
                record({{"type", "asset"}, {"book_id", run.book_id}, {"record", to_json(asset)}});
            };
            for (const auto& c : *run.characters) {
                add(c.name, EntityKind::Character, [&] { return build_generation_prompt(c); });
            }
            for (const auto& o : *run.objects) {
                add(o.name, EntityKind::Object, [&] { return build_generation_prompt(o, *run.historical_context); });
            }
        }
        assets = run.assets;
    }

    AssetForge forge(*providers_.mesh_generator, blobs_, providers_.forge);
    const std::string id = book.run.book_id;
    forge.generate_all(
        assets,
        [&](const AssetRecord& r) {
            std::lock_guard lock(mutex_);
            record({{"type", "asset"}, {"book_id", id}, {"record", to_json(r)}});
        },
        stop);

    const bool pending = std::any_of(assets.begin(), assets.end(), [](const AssetRecord& a) {
        return a.status == AssetStatus::Pending || a.status == AssetStatus::Generating;
    });
    if (pending) return false;  // stopped; resumes from the recorded job ids
    const bool any_generated = std::any_of(assets.begin(), assets.end(),
                                           [](const AssetRecord& a) { return a.status == AssetStatus::Generated; });
    if (!any_generated) throw Error(ErrorCode::EmptyBook, "no asset could be generated");
    transition(book, RunState::Scoring);
    return true;
}

bool PipelineService::run_scoring(Book& book) {
    std::vector<AssetRecord> assets;
    std::string id;
    {
        std::lock_guard lock(mutex_);
        assets = book.run.assets;
        id = book.run.book_id;
    }
    for (auto& asset : assets) {
        if (asset.status != AssetStatus::Generated) continue;
        bool scored;
        {
            std::lock_guard lock(mutex_);
            scored = book.run.review.find(asset.asset_id).has_value();
        }
        if (!scored) {
            const double score = score_asset(asset, *providers_.scorer, blobs_);
            PlausibilityRecord r{asset.asset_id, asset.keyword, score, classify(score, providers_.gate),
                                 DecidedBy::System, unix_now()};
            std::lock_guard lock(mutex_);
            record({{"type", "score"}, {"book_id", id}, {"record", to_json(r)}});
        }
        asset.transition(AssetStatus::Scored, unix_now());
        std::lock_guard lock(mutex_);
        record({{"type", "asset"}, {"book_id", id}, {"record", to_json(asset)}});
    }
    std::size_t suspicious;
    {
        std::lock_guard lock(mutex_);
        suspicious = book.run.review.suspicious_count();
    }
    transition(book, suspicious == 0 ? RunState::Assembling : RunState::AwaitingReview);
    return suspicious == 0;
}

void PipelineService::run_assembly(Book& book) {
    PipelineRun run;
    {
        std::lock_guard lock(mutex_);
        run = book.run;
    }
    const std::string& id = run.book_id;

    // Settle every scored asset as kept or removed.
    std::vector<ManifestAsset> kept;
    std::set<std::string> removed;
    std::vector<Keyword> keywords;
    std::map<std::string, std::string> asset_for_keyword;
    for (auto& asset : run.assets) {
        if (asset.status == AssetStatus::Scored) {
            asset.transition(run.review.usable(asset.asset_id) ? AssetStatus::Kept : AssetStatus::Removed, unix_now());
            std::lock_guard lock(mutex_);
            record({{"type", "asset"}, {"book_id", id}, {"record", to_json(asset)}});
        }
        if (asset.status == AssetStatus::Kept) {
            kept.push_back({asset.asset_id, asset.keyword, asset.mesh_ref});
            keywords.push_back({asset.keyword, asset.prompt.kind});
            asset_for_keyword[asset.keyword] = asset.asset_id;
        } else if (asset.status == AssetStatus::Removed) {
            removed.insert(asset.asset_id);
        }
    }
    if (kept.empty()) throw Error(ErrorCode::EmptyBook, "every asset was removed or failed");

    // Locate each keyword; one the text never names still gets a slot at the start.
    auto located = locate_occurrences(book.doc, keywords);
    for (const auto& missed : located.misses) {
        auto kw = std::find_if(keywords.begin(), keywords.end(), [&](const Keyword& k) { return k.text == missed; });
        KeywordOccurrence anchor;
        anchor.keyword = missed;
        anchor.kind = kw == keywords.end() ? EntityKind::Object : kw->kind;
        anchor.global_position = 0;
        anchor.match = MatchKind::SyntheticAnchor;
        located.occurrences.push_back(anchor);
    }
    std::stable_sort(located.occurrences.begin(), located.occurrences.end(),
                     [](const KeywordOccurrence& a, const KeywordOccurrence& b) { return a.global_position < b.global_position; });

    const auto division = split_for_division(std::move(located.occurrences));
    const auto pages = divide_pages(division.anchors, book.doc.word_count());
    std::map<std::size_t, std::vector<KeywordOccurrence>> riders;
    for (const auto& rider : division.riders) {
        riders[page_containing(pages, rider.global_position)].push_back(rider);
    }

    const AssetLookup lookup = [&](const KeywordOccurrence& occ) { return asset_for_keyword.at(occ.keyword); };
    std::vector<NarrationTrack> narration;
    std::vector<PopupEvent> popups;
    for (std::size_t i = 0; i < pages.size(); ++i) {
        const auto& page = pages[i];
        const std::string key = span_key(page);
        NarrationTrack track;
        if (auto cached = run.narration.find(key); cached != run.narration.end() && cached->second.page_index == page.page_index) {
            track = cached->second;
        } else {
            track = synthesize_narration(page, book.doc, *providers_.speech, blobs_);
            std::lock_guard lock(mutex_);
            record({{"type", "narration"}, {"book_id", id}, {"span", key}, {"track", to_json(track)}});
        }
        auto schedule = compute_popup_schedule(page, track, lookup, riders[i]);
        popups.insert(popups.end(), schedule.begin(), schedule.end());
        narration.push_back(track);
    }

    const auto manifest = assemble_manifest(id, run.title, pages, popups, narration, kept, removed);
    const std::string archive = make_bundle_archive(manifest, blobs_);
    validate_bundle_archive(archive);
    const std::string ref = blobs_.put(archive, "zip");
    {
        std::lock_guard lock(mutex_);
        record({{"type", "bundle"}, {"book_id", id}, {"ref", ref}, {"sha256", sha256_hex(archive)}});
    }
    transition(book, RunState::Ready);
}

BookSummary PipelineService::create_book(const std::string& title, const std::string& body,
                                         const std::string& language) {
    if (title.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "title is empty");
    }
    if (language.empty()) throw Error(ErrorCode::InvalidArgument, "language is empty");
    make_document("", title, body, language);  // EmptyStory / InvalidArgument before anything is stored

    std::shared_ptr<Book> book;
    {
        std::lock_guard lock(mutex_);
        std::uint64_t ordinal = 1;
        while (books_.count(make_book_id(title, body, language, ordinal))) ++ordinal;
        const std::string id = make_book_id(title, body, language, ordinal);
        record({{"type", "created"},
                {"book_id", id},
                {"title", title},
                {"language", language},
                {"body", body},
                {"created_at", unix_now()},
                {"sequence", next_sequence_}});
        book = books_.at(id);
    }
    start_worker(book);
    std::lock_guard lock(mutex_);
    return summarize(*book);
}

BookSummary PipelineService::create_book_from_image(const std::string& title, std::string_view image,
                                                    const std::string& language) {
    if (!providers_.text_recognizer) throw Error(ErrorCode::Config, "no text recognizer is configured");
    return create_book(title, providers_.text_recognizer->recognize(image), language);
}

// Caller holds mutex_.
BookSummary PipelineService::summarize(const Book& book) const {
    const auto& run = book.run;
    BookSummary s;
    s.book_id = run.book_id;
    s.title = run.title;
    s.state = run.state;
    s.created_at = run.created_at;
    if (run.entities) s.model_count = run.entities->characters.size() + run.entities->objects.size();
    if (!is_terminal(run.state)) {
        s.eta_provisional = !run.entities;
        const int models = run.entities ? std::max<int>(1, static_cast<int>(s.model_count))
                                        : provisional_model_count(book.doc.word_count());
        s.eta_seconds = estimate_generation_seconds(models, options_.eta);
    }
    return s;
}

BookSummary PipelineService::summary(const std::string& book_id) const {
    const auto book = find_book(book_id);
    std::lock_guard lock(mutex_);
    return summarize(*book);
}

json PipelineService::status(const std::string& book_id) const {
    const auto book = find_book(book_id);
    std::lock_guard lock(mutex_);
    const auto& run = book->run;
    json j = to_json(summarize(*book));
    j["language"] = run.language;
    j["word_count"] = book->doc.word_count();
    j["step_timestamps"] = run.step_timestamps;
    if (run.error) j["error"] = {{"code", *run.error_code}, {"message", *run.error}};
    json assets = json::array();
    for (const auto& a : run.assets) {
        json item = {{"asset_id", a.asset_id},
                     {"keyword", a.keyword},
                     {"kind", to_string(a.prompt.kind)},
                     {"status", to_string(a.status)}};
        if (!a.error.empty()) item["error"] = a.error;
        if (auto r = run.review.find(a.asset_id)) {
            item["score"] = r->score;
            item["verdict"] = to_string(r->verdict);
        }
        assets.push_back(std::move(item));
    }
    j["assets"] = std::move(assets);
    j["review"] = {{"suspicious", run.review.suspicious_count()}, {"completed", run.review.completed()}};
    if (run.state == RunState::Ready) j["bundle_sha256"] = run.bundle_sha256;
    return j;
}

std::vector<BookSummary> PipelineService::list_books() const {
    std::lock_guard lock(mutex_);
    std::vector<const Book*> ordered;
    for (const auto& [id, book] : books_) ordered.push_back(book.get());
    std::sort(ordered.begin(), ordered.end(), [](const Book* a, const Book* b) { return a->run.sequence > b->run.sequence; });
    std::vector<BookSummary> out;
    for (const Book* book : ordered) out.push_back(summarize(*book));
    return out;
}

std::vector<ReviewItem> PipelineService::review_items(const std::string& book_id) const {
    const auto book = find_book(book_id);
    std::vector<ReviewItem> items;
    for (const auto& r : book->run.review.review_queue()) {
        items.push_back({r.asset_id, r.keyword_text, r.score, r.verdict, r.decided_by,
                         "/v1/books/" + book_id + "/assets/" + r.asset_id + "/frontal"});
    }
    return items;
}

PlausibilityRecord PipelineService::post_verdict(const std::string& book_id, const std::string& asset_id,
                                                 ReviewAction action) {
    const auto book = find_book(book_id);
    std::lock_guard lock(mutex_);
    if (book->run.state != RunState::AwaitingReview) {
        throw Error(ErrorCode::WrongState, "book " + book_id + " is " + std::string(to_string(book->run.state)));
    }
    const auto before = book->run.review.find(asset_id);
    ReviewBoard trial = book->run.review;  // validate without touching live state
    const auto after = trial.apply_verdict(asset_id, action, DecidedBy::Human, unix_now());
    if (before && *before == after) return after;
    record({{"type", "verdict"}, {"book_id", book_id}, {"record", to_json(after)}});
    return after;
}

ReviewSummary PipelineService::complete_review(const std::string& book_id) {
    const auto book = find_book(book_id);
    ReviewSummary summary;
    {
        std::lock_guard lock(mutex_);
        if (book->run.state != RunState::AwaitingReview) {
            throw Error(ErrorCode::WrongState, "book " + book_id + " is " + std::string(to_string(book->run.state)));
        }
        const std::int64_t now = unix_now();
        ReviewBoard trial = book->run.review;
        summary = trial.complete_review(now);
        record({{"type", "review_complete"}, {"book_id", book_id}, {"at", now}});
        record({{"type", "state"}, {"book_id", book_id}, {"state", to_string(RunState::Assembling)}, {"at", now}});
    }
    start_worker(book);
    return summary;
}

BundleDownload PipelineService::download_bundle(const std::string& book_id) const {
    const auto book = find_book(book_id);
    std::string ref;
    {
        std::lock_guard lock(mutex_);
        if (book->run.state != RunState::Ready) {
            throw Error(ErrorCode::WrongState, "book " + book_id + " is " + std::string(to_string(book->run.state)));
        }
        ref = book->run.bundle_ref;
    }
    BundleDownload download{blobs_.get(ref), {}};
    download.sha256 = sha256_hex(download.bytes);
    return download;
}

std::string PipelineService::manifest_json(const std::string& book_id) const {
    return unzip_store(download_bundle(book_id).bytes).at("manifest.json");
}

std::string PipelineService::frontal_view(const std::string& book_id, const std::string& asset_id) const {
    const auto book = find_book(book_id);
    std::string ref;
    {
        std::lock_guard lock(mutex_);
        for (const auto& a : book->run.assets) {
            if (a.asset_id == asset_id) ref = a.frontal_view_ref;
        }
    }
    if (ref.empty()) throw Error(ErrorCode::NotFound, "no frontal view for asset " + asset_id);
    return blobs_.get(ref);
}

RunState PipelineService::wait_until_settled(const std::string& book_id, std::chrono::milliseconds timeout) const {
    const auto book = find_book(book_id);
    std::unique_lock lock(mutex_);
    changed_.wait_for(lock, timeout, [&] { return settled(book->run.state); });
    return book->run.state;
}

}  // namespace bookforge
