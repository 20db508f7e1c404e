#include "bookforge/layout.hpp"

#include "bookforge/error.hpp"

#include <algorithm>

namespace bookforge {

namespace {

std::vector<std::size_t> chunk_sizes(std::size_t count) {
    std::vector<std::size_t> sizes(count / kPreliminaryModelsPerPage, kPreliminaryModelsPerPage);
    if (count % kPreliminaryModelsPerPage != 0) sizes.push_back(count % kPreliminaryModelsPerPage);
    return sizes;
}

// Page spans for the given grouping of sorted positions.
struct Spans {
    std::vector<std::size_t> first;  // index of each page's first occurrence
    std::vector<std::size_t> start;
    std::vector<std::size_t> end;
};

Spans spans_for(const std::vector<std::size_t>& sizes, const std::vector<KeywordOccurrence>& occ,
                std::size_t total_words) {
    Spans spans;
    std::size_t next = 0;
    std::size_t cursor = 0;
    for (std::size_t page = 0; page < sizes.size(); ++page) {
        spans.first.push_back(next);
        spans.start.push_back(cursor);
        next += sizes[page];
        cursor = page + 1 == sizes.size() ? total_words : occ[next - 1].global_position + 1;
        spans.end.push_back(cursor);
    }
    return spans;
}

unsigned __int128 gcd128(unsigned __int128 a, unsigned __int128 b) {
    while (b != 0) {
        const auto r = a % b;
        a = b;
        b = r;
    }
    return a;
}

}  // namespace

std::vector<PageLayout> divide_pages(const std::vector<KeywordOccurrence>& occurrences,
                                     std::size_t total_words) {
    if (occurrences.empty()) throw Error(ErrorCode::EmptyBook, "no models left to place on pages");
    for (std::size_t i = 0; i < occurrences.size(); ++i) {
        if (occurrences[i].global_position >= total_words) {
            throw Error(ErrorCode::InvalidArgument, "occurrence '" + occurrences[i].keyword + "' lies past the end of the text");
        }
        if (i > 0 && occurrences[i].global_position <= occurrences[i - 1].global_position) {
            throw Error(ErrorCode::InvalidArgument, "occurrence positions must be strictly increasing");
        }
    }

    std::vector<std::size_t> sizes = chunk_sizes(occurrences.size());
    for (std::size_t page = 0; page + 1 < sizes.size(); ++page) {
        while (sizes[page] < kMaxModelsPerPage && page + 1 < sizes.size()) {
            const Spans spans = spans_for(sizes, occurrences, total_words);
            const auto words_here = static_cast<std::int64_t>(spans.end[page] - spans.start[page]);
            const auto words_next = static_cast<std::int64_t>(spans.end[page + 1] - spans.start[page + 1]);
            const auto first = occurrences[spans.first[page]].global_position;
            const auto last = occurrences[spans.first[page] + sizes[page] - 1].global_position;
            if (words_here - words_next <= static_cast<std::int64_t>(last - first)) break;

            ++sizes[page];
            std::size_t placed = 0;
            for (std::size_t p = 0; p <= page; ++p) placed += sizes[p];
            sizes.resize(page + 1);
            for (std::size_t rest : chunk_sizes(occurrences.size() - placed)) sizes.push_back(rest);
        }
    }

    const Spans spans = spans_for(sizes, occurrences, total_words);
    std::vector<PageLayout> pages;
    pages.reserve(sizes.size());
    for (std::size_t page = 0; page < sizes.size(); ++page) {
        PageLayout layout;
        layout.page_index = page + 1;
        layout.start_word = spans.start[page];
        layout.end_word = spans.end[page];
        const auto from = occurrences.begin() + static_cast<std::ptrdiff_t>(spans.first[page]);
        layout.occurrences.assign(from, from + static_cast<std::ptrdiff_t>(sizes[page]));
        for (auto& occ : layout.occurrences) occ.page_relative_position = occ.global_position - layout.start_word;
        pages.push_back(std::move(layout));
    }
    return pages;
}

std::int64_t popup_seconds(std::int64_t words_before, const Rational& rate) {
    if (!rate.positive()) throw Error(ErrorCode::InvalidArgument, "speech rate must be positive");
    if (words_before < 0) throw Error(ErrorCode::InvalidArgument, "word offset must be non-negative");
    // words_before * 5 / (num / den) = words_before * 5 * den / num
    const auto numerator = static_cast<unsigned __int128>(words_before) * 5u * static_cast<unsigned __int128>(rate.den);
    const auto denominator = static_cast<unsigned __int128>(rate.num);
    return static_cast<std::int64_t>((numerator + denominator - 1) / denominator);
}

Rational speech_rate(std::size_t word_count, const Rational& duration_seconds) {
    if (!duration_seconds.positive()) throw Error(ErrorCode::ZeroDurationAudio, "narration audio has zero duration");
    // word_count / (duration / 5) = 5 * word_count * den / num
    const auto num = static_cast<unsigned __int128>(word_count) * 5u * static_cast<unsigned __int128>(duration_seconds.den);
    const auto den = static_cast<unsigned __int128>(duration_seconds.num);
    const auto g = gcd128(num, den);
    return Rational::of(static_cast<std::int64_t>(num / g), static_cast<std::int64_t>(den / g));
}

std::vector<PopupEvent> compute_popup_schedule(const PageLayout& page, const NarrationTrack& track,
                                               const AssetLookup& asset_for,
                                               const std::vector<KeywordOccurrence>& riders) {
    std::vector<KeywordOccurrence> all = page.occurrences;
    all.insert(all.end(), riders.begin(), riders.end());
    std::stable_sort(all.begin(), all.end(),
                     [](const auto& a, const auto& b) { return a.global_position < b.global_position; });

    std::vector<PopupEvent> events;
    events.reserve(all.size());
    for (const auto& occ : all) {
        if (occ.global_position < page.start_word || occ.global_position >= page.end_word) {
            throw Error(ErrorCode::InvalidArgument, "occurrence '" + occ.keyword + "' is not on page " + std::to_string(page.page_index));
        }
        const auto before = occ.global_position - page.start_word;
        events.push_back({occ.keyword, asset_for ? asset_for(occ) : std::string{}, page.page_index, before,
                          popup_seconds(static_cast<std::int64_t>(before), track.speech_rate)});
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const auto& a, const auto& b) { return a.popup_seconds < b.popup_seconds; });
    return events;
}

DivisionInput split_for_division(std::vector<KeywordOccurrence> occurrences) {
    std::stable_sort(occurrences.begin(), occurrences.end(),
                     [](const auto& a, const auto& b) { return a.global_position < b.global_position; });
    DivisionInput input;
    for (auto& occ : occurrences) {
        const bool taken = !input.anchors.empty() && input.anchors.back().global_position == occ.global_position;
        if (taken) {
            input.riders.push_back(std::move(occ));
        } else {
            input.anchors.push_back(std::move(occ));
        }
    }
    return input;
}

std::size_t page_containing(const std::vector<PageLayout>& pages, std::size_t position) {
    for (std::size_t i = 0; i < pages.size(); ++i) {
        if (position >= pages[i].start_word && position < pages[i].end_word) return i;
    }
    throw Error(ErrorCode::InvalidArgument, "word " + std::to_string(position) + " lies outside every page");
}

}  // namespace bookforge
