#include <doctest.h>

#include <random>

#include "songsign/text.hpp"

using namespace songsign;

TEST_CASE("normalize_text examples") {
    CHECK(normalize_text("Smooth like butter") == "smooth like butter");
    CHECK(normalize_text("Gon' pop like trouble") == "gon' pop like trouble");
    CHECK(normalize_text("  Break   it down!! ") == "break it down");
    CHECK(normalize_text("") == "");
    CHECK(normalize_text("Side step, right, left to my beat") == "side step right left to my beat");
    CHECK(normalize_text("'Cause I, I, I'm in the stars tonight") == "'cause i i i'm in the stars tonight");
    CHECK(normalize_text("SAME-AS -- well - ok") == "same-as well ok");
    CHECK(normalize_text("Breakin\xE2\x80\x99 into") == "breakin' into");
    CHECK(normalize_text("<i>tag</i>") == "i tag i");
    CHECK(normalize_text("rock/roll...yeah") == "rock roll yeah");
}

TEST_CASE("normalize_text is idempotent on random strings") {
    std::mt19937 rng(7);
    const std::string alphabet = "aZ9 '-!?,.\t\n\"()[]-'";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(0, 24);
    for (int iter = 0; iter < 2000; ++iter) {
        std::string s;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) s.push_back(alphabet[pick(rng)]);
        const auto once = normalize_text(s);
        CHECK(normalize_text(once) == once);
        CHECK(once.find("  ") == std::string::npos);
    }
}

TEST_CASE("whitespace helpers") {
    CHECK(normalize_whitespace(" a \t b\n") == "a b");
    CHECK(split_whitespace("").empty());
    CHECK(word_tokens("Hot, like SUMMER!") == std::vector<std::string>{"hot", "like", "summer"});
}
