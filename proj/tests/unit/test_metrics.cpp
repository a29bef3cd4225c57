#include <doctest.h>

#include "songsign/error.hpp"
#include "songsign/metrics.hpp"

using namespace songsign;

TEST_CASE("overlap_coefficient examples") {
    CHECK(overlap_coefficient({"X", "Y"}, {"X", "Y"}) == Rational(1));
    CHECK(overlap_coefficient({"X"}, {"Y"}) == Rational(0));
    CHECK(overlap_coefficient({"ME", "SAME-AS", "BUTTER", "SMOOTH"}, {"SMOOTH", "LIKE", "BUTTER"}) == Rational(2, 3));
    CHECK(overlap_coefficient({}, {"A"}) == Rational(0));
    CHECK_THROWS_AS(overlap_coefficient({}, {}), Error);
}

TEST_CASE("overlap properties on a small alphabet") {
    const std::vector<std::string> alphabet = {"a", "b", "c", "d"};
    for (int ma = 0; ma < 16; ++ma) {
        for (int mb = 0; mb < 16; ++mb) {
            if (ma == 0 && mb == 0) continue;
            WordSet a, b;
            for (int k = 0; k < 4; ++k) {
                if (ma & (1 << k)) a.insert(alphabet[k]);
                if (mb & (1 << k)) b.insert(alphabet[k]);
            }
            const auto ab = overlap_coefficient(a, b);
            CHECK(ab == overlap_coefficient(b, a));
            if (!a.empty() && !b.empty() && ((ma & mb) == ma || (ma & mb) == mb)) CHECK(ab == Rational(1));
            CHECK((ab == Rational(0)) == ((ma & mb) == 0));
        }
    }
}

TEST_CASE("rational rendering") {
    CHECK(Rational(2, 3).percent() == "66.67%");
    CHECK(Rational(1).percent() == "100.00%");
    CHECK(Rational(0).percent() == "0.00%");
    CHECK(Rational(1, 8).percent() == "12.50%");
    CHECK(Rational(1, 200).percent() == "0.50%");
    CHECK(Rational(4, 6) == Rational(2, 3));
    CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
}

TEST_CASE("sign stats use the sample deviation") {
    // Six variants with mean 3.5 and sample sd ~1.22.
    const auto s = sign_stats({2, 3, 3, 3, 5, 5});
    CHECK(s.min == 2);
    CHECK(s.max == 5);
    CHECK(s.mean == Rational(7, 2));
    REQUIRE(s.stddev);
    CHECK(*s.stddev == doctest::Approx(1.2247).epsilon(1e-4));
    CHECK_FALSE(sign_stats({4}).stddev);
}

TEST_CASE("mean pairwise overlap") {
    CHECK_FALSE(mean_pairwise_overlap({{"a"}}));
    CHECK(*mean_pairwise_overlap({{"a", "b"}, {"a", "b"}}) == Rational(1));
    // pairs: (ab,a)=1, (ab,c)=0, (a,c)=0 -> 1/3
    CHECK(*mean_pairwise_overlap({{"a", "b"}, {"a"}, {"c"}}) == Rational(1, 3));
    CHECK_FALSE(mean_pairwise_overlap({{}, {}}));
}
