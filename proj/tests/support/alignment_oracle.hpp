#pragma once

// Brute-force references for the alignment DPs. Written independently of the
// library: multiset overlap via sorted merge, exhaustive recursion instead of
// tables.

#include <algorithm>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace songsign::testing {

using Tokens = std::vector<std::string>;

inline double oracle_similarity(Tokens a, Tokens b) {
    if (a.empty() && b.empty()) return 0.0;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    Tokens common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    return 2.0 * static_cast<double>(common.size()) / static_cast<double>(a.size() + b.size());
}

// Best total similarity over all monotone assignments where each line takes
// zero or one run of 1..cap consecutive unused cues scoring >= threshold.
inline double oracle_best_assignment(const std::vector<Tokens>& lines, const std::vector<Tokens>& cues, int cap,
                                     double threshold, std::size_t line = 0, std::size_t first_free = 0) {
    if (line == lines.size()) return 0.0;
    double best = oracle_best_assignment(lines, cues, cap, threshold, line + 1, first_free);
    for (std::size_t s = first_free; s < cues.size(); ++s) {
        Tokens run;
        for (std::size_t k = 1; k <= static_cast<std::size_t>(cap) && s + k <= cues.size(); ++k) {
            run.insert(run.end(), cues[s + k - 1].begin(), cues[s + k - 1].end());
            const double sim = oracle_similarity(lines[line], run);
            if (sim + 1e-12 < threshold) continue;
            best = std::max(best, sim + oracle_best_assignment(lines, cues, cap, threshold, line + 1, s + k));
        }
    }
    return best;
}

// Minimal edit cost: lyric deletion 1, ASR deletion 1, pairing cost
// 1 - similarity when similarity >= threshold (similarity supplied by caller).
template <typename Sim>
double oracle_edit_cost(const Tokens& lyric, const Tokens& asr, double threshold, Sim sim, std::size_t i = 0,
                        std::size_t j = 0) {
    if (i == lyric.size()) return static_cast<double>(asr.size() - j);
    if (j == asr.size()) return static_cast<double>(lyric.size() - i);
    double best = 1.0 + std::min(oracle_edit_cost(lyric, asr, threshold, sim, i + 1, j),
                                 oracle_edit_cost(lyric, asr, threshold, sim, i, j + 1));
    const double s = sim(lyric[i], asr[j]);
    if (s + 1e-12 >= threshold) best = std::min(best, 1.0 - s + oracle_edit_cost(lyric, asr, threshold, sim, i + 1, j + 1));
    return best;
}

// Random instance drawn from a small vocabulary so overlaps are common.
struct AssignmentInstance {
    std::vector<Tokens> lines;
    std::vector<Tokens> cues;
};

inline AssignmentInstance random_assignment_instance(std::mt19937& rng, int max_lines = 6, int max_cues = 6) {
    static const std::vector<std::string> vocab = {"smooth", "like", "butter", "hot", "summer", "heart", "break", "down"};
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto tokens = [&] {
        Tokens t;
        const int len = pick(0, 4);
        for (int i = 0; i < len; ++i) t.push_back(vocab[static_cast<std::size_t>(pick(0, static_cast<int>(vocab.size()) - 1))]);
        return t;
    };
    AssignmentInstance inst;
    const int n = pick(0, max_lines), m = pick(0, max_cues);
    for (int i = 0; i < n; ++i) inst.lines.push_back(tokens());
    for (int i = 0; i < m; ++i) {
        // Half the cues are noisy copies of a line, so real matches exist.
        if (n > 0 && pick(0, 1) == 0) {
            auto t = inst.lines[static_cast<std::size_t>(pick(0, n - 1))];
            if (!t.empty() && pick(0, 2) == 0) t.erase(t.begin() + pick(0, static_cast<int>(t.size()) - 1));
            inst.cues.push_back(t);
        } else {
            inst.cues.push_back(tokens());
        }
    }
    return inst;
}

} // namespace songsign::testing
