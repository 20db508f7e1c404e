#include "bookforge/ingest.hpp"

#include "bookforge/error.hpp"

#include <unicode/brkiter.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utext.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <memory>
#include <unordered_map>
#include <unordered_set>

namespace bookforge {

std::string_view to_string(EntityKind kind) {
    return kind == EntityKind::Character ? "character" : "object";
}

EntityKind entity_kind_from_string(std::string_view text) {
    if (text == "character") return EntityKind::Character;
    if (text == "object") return EntityKind::Object;
    throw Error(ErrorCode::InvalidArgument, "unknown entity kind '" + std::string(text) + "'");
}

std::string_view to_string(MatchKind kind) {
    switch (kind) {
        case MatchKind::Exact: return "exact";
        case MatchKind::Normalized: return "normalized";
        case MatchKind::SyntheticAnchor: return "synthetic_anchor";
    }
    return "exact";
}

std::string_view StoryDocument::text_of_words(std::size_t start_word, std::size_t end_word) const {
    if (start_word > end_word || end_word > tokens.size()) {
        throw Error(ErrorCode::InvalidArgument, "word range out of bounds");
    }
    if (start_word == end_word) return {};
    const std::size_t begin = start_word == 0 ? 0 : tokens[start_word].byte_start;
    const std::size_t end = end_word == tokens.size() ? body.size() : tokens[end_word].byte_start;
    return std::string_view(body).substr(begin, end - begin);
}

namespace {

void require_valid_utf8(std::string_view text) {
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(bytes, i, length, c);
        if (c < 0) throw Error(ErrorCode::InvalidArgument, "input is not valid UTF-8");
    }
}

struct UTextCloser {
    void operator()(UText* text) const { utext_close(text); }
};

// Splits one word-break segment so that every ideograph stands alone.
void emit_segment(std::string_view body, std::size_t begin, std::size_t end,
                  std::vector<WordToken>& out) {
    const auto* bytes = reinterpret_cast<const uint8_t*>(body.data());
    auto i = static_cast<int32_t>(begin);
    const auto stop = static_cast<int32_t>(end);
    std::size_t run_start = begin;
    bool in_run = false;

    auto flush = [&](std::size_t run_end) {
        if (in_run && run_end > run_start) {
            out.push_back({out.size(), run_start, run_end,
                           std::string(body.substr(run_start, run_end - run_start))});
        }
        in_run = false;
    };

    while (i < stop) {
        const auto at = static_cast<std::size_t>(i);
        UChar32 c;
        U8_NEXT(bytes, i, stop, c);
        if (u_hasBinaryProperty(c, UCHAR_IDEOGRAPHIC)) {
            flush(at);
            out.push_back({out.size(), at, static_cast<std::size_t>(i),
                           std::string(body.substr(at, static_cast<std::size_t>(i) - at))});
        } else if (!in_run) {
            run_start = at;
            in_run = true;
        }
    }
    flush(end);
}

std::string fold_utf16(icu::UnicodeString text) {
    std::string out;
    text.foldCase().toUTF8String(out);
    return out;
}

}  // namespace

std::vector<WordToken> segment_words(std::string_view body, std::string_view language) {
    if (body.empty()) throw Error(ErrorCode::EmptyStory, "story body is empty");
    require_valid_utf8(body);

    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<UText, UTextCloser> text(
        utext_openUTF8(nullptr, body.data(), static_cast<int64_t>(body.size()), &status));
    const icu::Locale locale(std::string(language).c_str());
    std::unique_ptr<icu::BreakIterator> words(icu::BreakIterator::createWordInstance(locale, status));
    if (U_FAILURE(status)) {
        throw Error(ErrorCode::Io, std::string("word break iterator: ") + u_errorName(status));
    }
    words->setText(text.get(), status);

    std::vector<WordToken> tokens;
    int32_t start = words->first();
    for (int32_t end = words->next(); end != icu::BreakIterator::DONE; start = end, end = words->next()) {
        if (words->getRuleStatus() == UBRK_WORD_NONE) continue;
        emit_segment(body, static_cast<std::size_t>(start), static_cast<std::size_t>(end), tokens);
    }
    if (tokens.empty()) throw Error(ErrorCode::EmptyStory, "story body contains no words");
    return tokens;
}

StoryDocument make_document(std::string book_id, std::string title, std::string body,
                            std::string language) {
    StoryDocument doc;
    doc.tokens = segment_words(body, language);
    doc.book_id = std::move(book_id);
    doc.title = std::move(title);
    doc.language = std::move(language);
    doc.body = std::move(body);
    return doc;
}

std::string detokenize(const StoryDocument& doc) {
    std::string out;
    out.reserve(doc.body.size());
    std::size_t cursor = 0;
    for (const auto& token : doc.tokens) {
        out.append(doc.body, cursor, token.byte_start - cursor);
        out += token.surface;
        cursor = token.byte_end;
    }
    out.append(doc.body, cursor, std::string::npos);
    return out;
}

std::string case_fold(std::string_view text) {
    return fold_utf16(icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size()))));
}

std::string loose_normalize(std::string_view text) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfkd = icu::Normalizer2::getNFKDInstance(status);
    if (U_FAILURE(status)) throw Error(ErrorCode::Io, "NFKD normalizer unavailable");

    icu::UnicodeString source = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    source.foldCase();
    icu::UnicodeString decomposed = nfkd->normalize(source, status);
    if (U_FAILURE(status)) throw Error(ErrorCode::InvalidArgument, "cannot normalize text");

    icu::UnicodeString stripped;
    for (int32_t i = 0; i < decomposed.length();) {
        const UChar32 c = decomposed.char32At(i);
        if (u_charType(c) != U_NON_SPACING_MARK) stripped.append(c);
        i += U16_LENGTH(c);
    }
    return fold_utf16(stripped);
}

namespace {

class OccurrenceIndex {
public:
    explicit OccurrenceIndex(const StoryDocument& doc) : doc_(doc) {
        folded_.reserve(doc.tokens.size());
        for (const auto& token : doc.tokens) {
            folded_.push_back(case_fold(token.surface));
            by_first_token_[folded_.back()].push_back(folded_.size() - 1);
        }
    }

    std::optional<std::size_t> exact(const std::vector<std::string>& needle) const {
        auto it = by_first_token_.find(needle.front());
        if (it == by_first_token_.end()) return std::nullopt;
        for (std::size_t start : it->second) {
            if (start + needle.size() > folded_.size()) break;
            if (std::equal(needle.begin(), needle.end(), folded_.begin() + static_cast<std::ptrdiff_t>(start))) {
                return start;
            }
        }
        return std::nullopt;
    }

    std::optional<std::size_t> normalized(std::string_view needle) {
        if (needle.empty()) return std::nullopt;
        build_loose();
        const auto at = loose_text_.find(needle);
        if (at == std::string::npos) return std::nullopt;
        auto owner = std::upper_bound(loose_starts_.begin(), loose_starts_.end(), at);
        return static_cast<std::size_t>(owner - loose_starts_.begin()) - 1;
    }

private:
    void build_loose() {
        if (!loose_starts_.empty()) return;
        for (const auto& token : doc_.tokens) {
            if (!loose_text_.empty()) loose_text_ += ' ';
            loose_starts_.push_back(loose_text_.size());
            loose_text_ += loose_normalize(token.surface);
        }
    }

    const StoryDocument& doc_;
    std::vector<std::string> folded_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_first_token_;
    std::string loose_text_;
    std::vector<std::size_t> loose_starts_;
};

std::vector<std::string> keyword_tokens(const std::string& keyword, const std::string& language) {
    try {
        std::vector<std::string> out;
        for (const auto& token : segment_words(keyword, language)) out.push_back(case_fold(token.surface));
        return out;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::EmptyStory) return {};
        throw;
    }
}

}  // namespace

OccurrenceResult locate_occurrences(const StoryDocument& doc, const std::vector<Keyword>& keywords) {
    if (keywords.empty()) throw Error(ErrorCode::InvalidArgument, "keyword list is empty");
    std::unordered_set<std::string> seen;
    for (const auto& keyword : keywords) {
        if (!seen.insert(case_fold(keyword.text)).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate keyword '" + keyword.text + "'");
        }
    }

    OccurrenceIndex index(doc);
    OccurrenceResult result;
    for (const auto& keyword : keywords) {
        const auto needle = keyword_tokens(keyword.text, doc.language);
        if (needle.empty()) {
            result.misses.push_back(keyword.text);
            continue;
        }
        if (auto at = index.exact(needle)) {
            result.occurrences.push_back({keyword.text, keyword.kind, *at, std::nullopt, MatchKind::Exact});
            continue;
        }
        std::string loose;
        for (const auto& part : needle) {
            if (!loose.empty()) loose += ' ';
            loose += loose_normalize(part);
        }
        if (auto at = index.normalized(loose)) {
            result.occurrences.push_back({keyword.text, keyword.kind, *at, std::nullopt, MatchKind::Normalized});
            continue;
        }
        result.misses.push_back(keyword.text);
    }
    std::stable_sort(result.occurrences.begin(), result.occurrences.end(),
                     [](const auto& a, const auto& b) { return a.global_position < b.global_position; });
    return result;
}

}  // namespace bookforge
