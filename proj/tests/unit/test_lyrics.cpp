#include <doctest.h>

#include <random>

#include "songsign/error.hpp"
#include "songsign/text.hpp"
#include "songsign/text_sources.hpp"

using namespace songsign;

TEST_CASE("parse_lyrics examples") {
    const auto doc = parse_lyrics("[Verse 1]\nSmooth like butter\nLike a criminal undercover");
    REQUIRE(doc.sections.size() == 1);
    CHECK(doc.sections[0].label == "Verse 1");
    CHECK(doc.sections[0].lines.size() == 2);

    const auto body = parse_lyrics("Hello");
    REQUIRE(body.sections.size() == 1);
    CHECK(body.sections[0] == LyricsSection{"Body", {"Hello"}});

    const auto dropped = parse_lyrics("[Chorus]\n\n[Verse 1]\nA");
    REQUIRE(dropped.sections.size() == 1);
    CHECK(dropped.sections[0] == LyricsSection{"Verse 1", {"A"}});

    CHECK_THROWS_AS(parse_lyrics(""), Error);
    CHECK_THROWS_AS(parse_lyrics("[Intro]\n\n  \n"), Error);
}

TEST_CASE("repeated labels are made unique and lines are flattened") {
    const auto doc = parse_lyrics("Intro line\n[Chorus]\nA\n[Verse]\nB\n[Chorus]\nA\n");
    REQUIRE(doc.sections.size() == 4);
    CHECK(doc.sections[0].label == "Body");
    CHECK(doc.sections[3].label == "Chorus (2)");
    const auto lines = lyric_lines(doc);
    REQUIRE(lines.size() == 4);
    CHECK(lines[3].index == 3);
    CHECK(lines[3].section == "Chorus (2)");
}

TEST_CASE("line count equals non-header non-blank rows") {
    std::mt19937 rng(3);
    const std::vector<std::string> rows = {"[Verse 1]", "[Chorus]", "", "   ", "Smooth like butter", "Hot like summer",
                                           "...", "Break it down", "[Bridge]"};
    for (int iter = 0; iter < 300; ++iter) {
        std::string data;
        std::size_t expected = 0;
        const int n = std::uniform_int_distribution<int>(1, 15)(rng);
        for (int i = 0; i < n; ++i) {
            const auto& r = rows[std::uniform_int_distribution<std::size_t>(0, rows.size() - 1)(rng)];
            data += r + "\n";
            if (!r.empty() && r.front() != '[' && !normalize_text(r).empty()) ++expected;
        }
        if (expected == 0) {
            CHECK_THROWS_AS(parse_lyrics(data), Error);
        } else {
            CHECK(parse_lyrics(data).line_count() == expected);
        }
    }
}
