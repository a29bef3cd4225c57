#include "songsign/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace songsign {

Rational overlap_coefficient(const WordSet& a, const WordSet& b) {
    if (a.empty() && b.empty()) {
        throw Error(ErrorCode::BothEmpty, "overlap coefficient undefined for two empty sets");
    }
    std::int64_t common = 0;
    for (const auto& w : a) common += b.count(w);
    const auto smaller = static_cast<std::int64_t>(std::min(a.size(), b.size()));
    if (smaller == 0) return Rational(0);
    return Rational(common, smaller);
}

SignStats sign_stats(const std::vector<int>& counts) {
    SignStats s;
    if (counts.empty()) return s;
    s.min = *std::min_element(counts.begin(), counts.end());
    s.max = *std::max_element(counts.begin(), counts.end());
    std::int64_t total = 0;
    for (int c : counts) total += c;
    const auto n = static_cast<std::int64_t>(counts.size());
    s.mean = Rational(total, n);
    if (n >= 2) {
        // sum of squared deviations, exactly: sum(c^2) - total^2 / n
        std::int64_t sq = 0;
        for (int c : counts) sq += static_cast<std::int64_t>(c) * c;
        const Rational ss = Rational(sq) - Rational(total * total, n);
        s.stddev = std::sqrt((ss / Rational(n - 1)).to_double());
    }
    return s;
}

std::optional<Rational> mean_pairwise_overlap(const std::vector<WordSet>& sets) {
    Rational sum;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            if (sets[i].empty() && sets[j].empty()) continue;
            sum += overlap_coefficient(sets[i], sets[j]);
            ++pairs;
        }
    }
    if (pairs == 0) return std::nullopt;
    return sum / Rational(pairs);
}

} // namespace songsign
