#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bookforge/ingest.hpp"
#include "bookforge/rational.hpp"

namespace bookforge {

inline constexpr std::size_t kPreliminaryModelsPerPage = 4;
inline constexpr std::size_t kMaxModelsPerPage = 6;

struct PageLayout {
    std::size_t page_index = 1;  // 1-based
    std::size_t start_word = 0;  // [start_word, end_word) in global word indices
    std::size_t end_word = 0;
    std::vector<KeywordOccurrence> occurrences;

    std::size_t word_count() const { return end_word - start_word; }
    std::size_t first_keyword_position() const { return occurrences.front().global_position; }
    std::size_t last_keyword_position() const { return occurrences.back().global_position; }

    bool operator==(const PageLayout&) const = default;
};

/// Groups occurrences into pages of 4-6 models (the last page may hold fewer).
///
/// Starts from pages of four; a page's text ends right after the word of its
/// last model and the final page runs to the end of the text. Scanning page
/// pairs left to right, the first model of page i+1 moves onto page i while
///     W_i - W_{i+1} > P_{i,last} - P_{i,first}
/// and page i holds fewer than six models. After every move the models that
/// follow page i are regrouped in fours, so no page but the last drops below
/// four.
///
/// Occurrences must have strictly increasing positions below total_words.
/// Throws EmptyBook on an empty list.
std::vector<PageLayout> divide_pages(const std::vector<KeywordOccurrence>& occurrences,
                                     std::size_t total_words);

/// Pop-up second for a model with `words_before` words ahead of it on its page
/// at `rate` words per five seconds: ceil(words_before * 5 / rate), exact.
std::int64_t popup_seconds(std::int64_t words_before, const Rational& rate);

struct NarrationTrack {
    std::size_t page_index = 1;
    std::string audio_ref;
    Rational duration_seconds;
    Rational speech_rate;  // words per five seconds

    bool operator==(const NarrationTrack&) const = default;
};

/// r = word_count / (duration / 5). Throws ZeroDurationAudio for a zero duration.
Rational speech_rate(std::size_t word_count, const Rational& duration_seconds);

struct PopupEvent {
    std::string keyword;
    std::string asset_id;
    std::size_t page_index = 1;
    std::size_t page_relative_position = 0;  // N_K
    std::int64_t popup_seconds = 0;          // T

    bool operator==(const PopupEvent&) const = default;
};

using AssetLookup = std::function<std::string(const KeywordOccurrence&)>;

/// Events for the page's occurrences plus any `riders` (occurrences that sit on
/// this page without taking part in division). Sorted by T, ties in text order.
std::vector<PopupEvent> compute_popup_schedule(const PageLayout& page, const NarrationTrack& track,
                                               const AssetLookup& asset_for = {},
                                               const std::vector<KeywordOccurrence>& riders = {});

/// Splits located occurrences into the ones that drive page division (the
/// first at each distinct word position) and riders that share a word with an
/// earlier one. Synthetic anchors all sit on word 0, so at most one drives.
struct DivisionInput {
    std::vector<KeywordOccurrence> anchors;
    std::vector<KeywordOccurrence> riders;
};

DivisionInput split_for_division(std::vector<KeywordOccurrence> occurrences);

/// Index of the page whose span holds `position`.
std::size_t page_containing(const std::vector<PageLayout>& pages, std::size_t position);

}  // namespace bookforge
