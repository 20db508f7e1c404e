#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bookforge {

enum class EntityKind { Character, Object };

std::string_view to_string(EntityKind kind);
EntityKind entity_kind_from_string(std::string_view text);

struct WordToken {
    std::size_t word_index = 0;
    std::size_t byte_start = 0;  // [byte_start, byte_end) into the body
    std::size_t byte_end = 0;
    std::string surface;

    bool operator==(const WordToken&) const = default;
};

struct StoryDocument {
    std::string book_id;
    std::string title;
    std::string language = "en";
    std::string body;
    std::vector<WordToken> tokens;

    std::size_t word_count() const { return tokens.size(); }

    /// Body bytes from word start_word up to the start of word end_word, so
    /// consecutive ranges tile the body. An end equal to word_count() runs to
    /// the end of the body; a start of 0 begins at byte 0.
    std::string_view text_of_words(std::size_t start_word, std::size_t end_word) const;
};

enum class MatchKind { Exact, Normalized, SyntheticAnchor };

std::string_view to_string(MatchKind kind);

struct KeywordOccurrence {
    std::string keyword;
    EntityKind kind = EntityKind::Object;
    std::size_t global_position = 0;
    std::optional<std::size_t> page_relative_position;  // set by the assembler
    MatchKind match = MatchKind::Exact;

    bool synthetic_anchor() const { return match == MatchKind::SyntheticAnchor; }
    bool operator==(const KeywordOccurrence&) const = default;
};

struct Keyword {
    std::string text;
    EntityKind kind = EntityKind::Object;
};

struct OccurrenceResult {
    std::vector<KeywordOccurrence> occurrences;  // sorted by global_position
    std::vector<std::string> misses;
};

/// Splits UTF-8 text into word tokens. Alphabetic runs follow Unicode word
/// boundaries; every Han ideograph is a token of its own. Whitespace and
/// punctuation separate tokens and are never tokens themselves.
///
/// Throws EmptyStory when no word is found and InvalidArgument on malformed
/// UTF-8.
std::vector<WordToken> segment_words(std::string_view body, std::string_view language = "en");

StoryDocument make_document(std::string book_id, std::string title, std::string body,
                            std::string language = "en");

/// Rebuilds the body from tokens and the separator bytes between them.
std::string detokenize(const StoryDocument& doc);

/// Simple Unicode case fold.
std::string case_fold(std::string_view text);

/// Case fold plus NFKD with combining marks dropped ("Café" and "ｃａｆｅ" both
/// become "cafe").
std::string loose_normalize(std::string_view text);

/// First mention of each keyword. Exact case-folded token-sequence match is
/// tried first, then a normalized substring match; keywords found by neither
/// are returned as misses.
OccurrenceResult locate_occurrences(const StoryDocument& doc, const std::vector<Keyword>& keywords);

}  // namespace bookforge
