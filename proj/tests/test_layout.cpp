#include <doctest.h>

#include "bookforge/error.hpp"
#include "bookforge/layout.hpp"
#include "division_reference.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <iterator>
#include <random>

using namespace bookforge;

namespace {

std::vector<KeywordOccurrence> at_positions(const std::vector<std::size_t>& positions) {
    std::vector<KeywordOccurrence> out;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        KeywordOccurrence occ;
        occ.keyword = "k" + std::to_string(i);
        occ.global_position = positions[i];
        out.push_back(occ);
    }
    return out;
}

std::vector<std::size_t> counts(const std::vector<PageLayout>& pages) {
    std::vector<std::size_t> out;
    for (const auto& p : pages) out.push_back(p.occurrences.size());
    return out;
}

std::vector<std::size_t> random_positions(std::mt19937_64& rng, std::size_t n, std::size_t total) {
    std::vector<std::size_t> all(total);
    for (std::size_t i = 0; i < total; ++i) all[i] = i;
    std::vector<std::size_t> picked;
    std::sample(all.begin(), all.end(), std::back_inserter(picked), n, rng);
    return picked;
}

std::int64_t oracle_popup(std::int64_t n, std::int64_t num, std::int64_t den) {
    using boost::multiprecision::cpp_bin_float_100;
    const cpp_bin_float_100 t = cpp_bin_float_100(n) * 5 / (cpp_bin_float_100(num) / cpp_bin_float_100(den));
    return ceil(t).convert_to<std::int64_t>();
}

}  // namespace

TEST_CASE("moves stop at six models per page") {
    const auto pages = divide_pages(at_positions({400, 410, 420, 430, 440, 450, 460, 470}), 480);
    CHECK(counts(pages) == std::vector<std::size_t>{6, 2});
    CHECK(pages[0].start_word == 0);
    CHECK(pages[0].end_word == 451);
    CHECK(pages[1].start_word == 451);
    CHECK(pages[1].end_word == 480);
}

TEST_CASE("evenly spaced models need no moves") {
    std::vector<std::size_t> positions;
    for (std::size_t p = 50; p < 1000; p += 100) positions.push_back(p);
    const auto pages = divide_pages(at_positions(positions), 1000);
    CHECK(counts(pages) == std::vector<std::size_t>{4, 4, 2});
    CHECK(pages[0].word_count() == 351);
    CHECK(pages[1].word_count() == 400);
    CHECK(pages[2].word_count() == 249);
}

TEST_CASE("fewer than four models make one page") {
    const auto pages = divide_pages(at_positions({3, 9, 12}), 20);
    REQUIRE(pages.size() == 1);
    CHECK(pages[0].occurrences.size() == 3);
    CHECK(pages[0].end_word == 20);
}

TEST_CASE("division input errors") {
    CHECK_THROWS_AS(divide_pages({}, 10), Error);
    try {
        divide_pages({}, 10);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyBook);
    }
    CHECK_THROWS_AS(divide_pages(at_positions({5, 5}), 10), Error);
    CHECK_THROWS_AS(divide_pages(at_positions({5, 3}), 10), Error);
    CHECK_THROWS_AS(divide_pages(at_positions({10}), 10), Error);
}

TEST_CASE("random instances match the reference and keep the invariants") {
    std::mt19937_64 rng(20240611);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t total = std::uniform_int_distribution<std::size_t>(1, 600)(rng);
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(total, 40))(rng);
        const auto positions = random_positions(rng, n, total);
        const auto pages = divide_pages(at_positions(positions), total);
        const auto expected = reference::divide(positions, total);

        REQUIRE(pages.size() == expected.size());
        std::size_t cursor = 0;
        std::size_t seen = 0;
        for (std::size_t i = 0; i < pages.size(); ++i) {
            CHECK(pages[i].start_word == expected[i].start);
            CHECK(pages[i].end_word == expected[i].end);
            CHECK(pages[i].start_word == cursor);
            cursor = pages[i].end_word;
            const auto size = pages[i].occurrences.size();
            CHECK(size <= 6);
            CHECK(size >= (i + 1 == pages.size() ? 1u : 4u));
            for (std::size_t k = 0; k < size; ++k) {
                CHECK(pages[i].occurrences[k].global_position == positions[seen + k]);
                CHECK(pages[i].occurrences[k].global_position == expected[i].positions[k]);
            }
            seen += size;
            if (i + 1 < pages.size()) {
                const auto diff = static_cast<long>(pages[i].word_count()) - static_cast<long>(pages[i + 1].word_count());
                const auto spread = static_cast<long>(pages[i].last_keyword_position() - pages[i].first_keyword_position());
                CHECK((diff <= spread || size == 6));
            }
        }
        CHECK(cursor == total);
        CHECK(seen == n);
    }
}

TEST_CASE("pop-up seconds") {
    const auto ten = Rational::of(10, 1);
    CHECK(popup_seconds(0, ten) == 0);
    CHECK(popup_seconds(30, ten) == 15);
    CHECK(popup_seconds(31, ten) == 16);
    CHECK(popup_seconds(1, Rational::of(1, 3)) == 15);
    CHECK_THROWS_AS(popup_seconds(-1, ten), Error);
}

TEST_CASE("pop-up seconds agree with a 100-digit oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5000; ++trial) {
        const std::int64_t n = std::uniform_int_distribution<std::int64_t>(0, 100000)(rng);
        const std::int64_t den = std::uniform_int_distribution<std::int64_t>(1, 1000000)(rng);
        const std::int64_t num = std::uniform_int_distribution<std::int64_t>(1, 100 * den)(rng);
        const auto rate = Rational::of(num, den);
        REQUIRE(popup_seconds(n, rate) == oracle_popup(n, rate.num, rate.den));
    }
}

TEST_CASE("pop-up seconds never decrease with words before") {
    const auto rate = Rational::of(37, 3);
    std::int64_t previous = 0;
    for (std::int64_t n = 0; n < 2000; ++n) {
        const auto t = popup_seconds(n, rate);
        CHECK(t >= previous);
        previous = t;
    }
}

TEST_CASE("speech rate from audio length") {
    CHECK(speech_rate(120, Rational::of(60, 1)) == Rational::of(10, 1));
    CHECK(speech_rate(100, Rational::of(50, 1)) == Rational::of(10, 1));
    CHECK(speech_rate(7, Rational::of(3, 2)) == Rational::of(70, 3));
    try {
        speech_rate(10, Rational::of(0, 1));
        FAIL("expected ZeroDurationAudio");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroDurationAudio);
    }
}

TEST_CASE("schedule is ordered by time then text order and counts from the page start") {
    PageLayout page;
    page.page_index = 2;
    page.start_word = 100;
    page.end_word = 200;
    page.occurrences = at_positions({100, 130, 131});
    NarrationTrack track;
    track.speech_rate = Rational::of(10, 1);
    KeywordOccurrence rider;
    rider.keyword = "rider";
    rider.global_position = 130;
    const auto events = compute_popup_schedule(page, track, [](const KeywordOccurrence& o) { return "a-" + o.keyword; }, {rider});
    REQUIRE(events.size() == 4);
    CHECK(events[0].popup_seconds == 0);
    CHECK(events[1].keyword == "k1");
    CHECK(events[2].keyword == "rider");
    CHECK(events[2].popup_seconds == 15);
    CHECK(events[3].popup_seconds == 16);
    CHECK(events[3].asset_id == "a-k2");
    CHECK(events[3].page_relative_position == 31);
}

TEST_CASE("tied positions: the first drives division, the rest ride along") {
    auto occ = at_positions({0, 0, 4, 4, 9});
    occ[1].match = MatchKind::SyntheticAnchor;
    const auto split = split_for_division(occ);
    REQUIRE(split.anchors.size() == 3);
    REQUIRE(split.riders.size() == 2);
    CHECK(split.anchors[0].keyword == "k0");
    CHECK(split.riders[0].keyword == "k1");
    CHECK(split.riders[1].keyword == "k3");
    const auto pages = divide_pages(split.anchors, 12);
    CHECK(page_containing(pages, 4) == 0);
    CHECK_THROWS_AS(page_containing(pages, 12), Error);
}
