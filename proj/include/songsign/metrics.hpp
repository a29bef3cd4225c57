#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "songsign/rational.hpp"

namespace songsign {

using WordSet = std::set<std::string>;

// |a ∩ b| / min(|a|, |b|). Throws Error{BothEmpty} when both sets are empty.
Rational overlap_coefficient(const WordSet& a, const WordSet& b);

struct SignStats {
    int min = 0;
    int max = 0;
    Rational mean;
    std::optional<double> stddev; // sample (n-1) standard deviation; absent for n < 2
};

SignStats sign_stats(const std::vector<int>& counts);

// Mean of overlap_coefficient over all unordered pairs, skipping pairs where
// both sets are empty. Absent when fewer than two sets or no usable pair.
std::optional<Rational> mean_pairwise_overlap(const std::vector<WordSet>& sets);

} // namespace songsign
