#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "songsign/model.hpp"

namespace songsign {

// Classifier prefixes, longest first so BPCL wins over BCL/CL.
inline constexpr std::string_view kClassifierPrefixes[] = {"BPCL", "LCL", "DCL", "SCL", "ICL", "PCL", "BCL", "CL"};

// Splits a gloss string into tokens. See docs/gloss-grammar.md for the EBNF.
// Token surfaces have internal whitespace runs collapsed to one space, so
// joining surfaces with " " reproduces the whitespace-normalized input
// (adjacent bracket groups such as `["a"]["b"]` come back space-separated).
//
// Throws Error{UnbalancedBracket} with details {"offset": byte offset of the
// unclosed '[' or '('}.
std::vector<GlossToken> tokenize_gloss(std::string_view raw);

// Join of token surfaces with single spaces.
std::string render_gloss(const std::vector<GlossToken>& tokens);

// True when `word` is a bare classifier handle (CL, CL:5, CL-5, LCL"x", ...).
bool has_classifier_prefix(std::string_view word);

GlossMetrics gloss_metrics(const std::vector<GlossToken>& tokens);

// Normalized surfaces of the tokens that count as signs (manual signs and
// fingerspelling). NMS and classifiers are excluded.
std::set<std::string> manual_sign_set(const std::vector<GlossToken>& tokens);

} // namespace songsign
