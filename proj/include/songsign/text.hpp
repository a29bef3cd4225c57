#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace songsign {

// Lowercase (ASCII), drop punctuation except apostrophes touching a letter or
// digit and hyphens between two letters/digits, collapse whitespace.
// Dropped punctuation separates words ("a/b" -> "a b").
// Curly apostrophes are folded to '\''. Bytes >= 0x80 are kept as letters.
// Idempotent.
std::string normalize_text(std::string_view raw);

// Collapse whitespace runs to one space and trim.
std::string normalize_whitespace(std::string_view raw);

// Tokens of normalize_text(raw), split on spaces.
std::vector<std::string> word_tokens(std::string_view raw);

std::vector<std::string> split_whitespace(std::string_view raw);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool is_space(char c);

// 2 * |multiset intersection| / (|a| + |b|); 0 when both are empty.
double token_set_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b);

} // namespace songsign
