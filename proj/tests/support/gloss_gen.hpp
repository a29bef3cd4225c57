#pragma once

// Random gloss generator for round-trip properties. Produces a raw string with
// irregular whitespace plus the kinds and canonical surfaces it expects the
// tokenizer to recover.

#include <random>
#include <string>
#include <vector>

#include "songsign/model.hpp"

namespace songsign::testing {

struct GeneratedGloss {
    std::string raw;
    std::vector<TokenKind> kinds;
    std::vector<std::string> surfaces;
};

inline GeneratedGloss generate_gloss(std::mt19937& rng) {
    static const std::vector<std::string> signs = {"SMOOTH", "LIKE", "BUTTER", "ME", "SAME-AS", "LET'S", "GO-AHEAD",
                                                   "RHYTHM!", "HEART", "CLOSE", "CLEAN", "SCLERA", "FSTOP?", "I",
                                                   "(2h)", "(both hands)", "BUTTER,", "X"};
    static const std::vector<std::string> nms = {"[HEAD-nod]", "[CL \"pump\"]", "[LCL\"shoot\"]",
                                                 "[(2h) \"people looking\"]", "[\"move right\"]",
                                                 "[CL:1 \"person wearing sunglasses, looking cool\"]",
                                                 "[[nested] x]"};
    static const std::vector<std::string> classifiers = {"CL", "CL:5", "CL-5 (basketball shooting)", "BPCL:1",
                                                         "LCL\"shoot\"", "DCL:B", "SCL:V (walking)", "ICL", "PCL",
                                                         "BCL(thing)"};
    static const std::vector<std::string> fs = {"F-S 'L-E-B-R-O-N'", "F-S (FingerSpelling) 'L-E-B-R-O-N'",
                                                "F-S \"A-N-N\"", "F-S"};
    static const std::vector<std::string> gaps = {" ", "  ", "\t", "\n", " \n\t "};

    std::uniform_int_distribution<int> len_dist(0, 8);
    std::uniform_int_distribution<int> kind_dist(0, 9);
    GeneratedGloss g;
    const int n = len_dist(rng);
    auto pick = [&](const std::vector<std::string>& v) { return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)]; };
    if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) g.raw += pick(gaps);
    for (int i = 0; i < n; ++i) {
        if (i > 0) g.raw += pick(gaps);
        const int k = kind_dist(rng);
        std::string surface;
        TokenKind kind;
        if (k < 5) {
            kind = TokenKind::manual_sign;
            surface = pick(signs);
        } else if (k < 7) {
            kind = TokenKind::nms;
            surface = pick(nms);
        } else if (k < 9) {
            kind = TokenKind::classifier;
            surface = pick(classifiers);
        } else {
            kind = TokenKind::fingerspelling;
            surface = pick(fs);
        }
        // A bare "F-S" or bare classifier must not swallow a following
        // quoted/parenthesized manual token.
        if (!g.kinds.empty()) {
            const auto prev = g.kinds.back();
            const bool opens_paren = surface.front() == '(';
            if ((prev == TokenKind::classifier || prev == TokenKind::fingerspelling) && opens_paren &&
                g.surfaces.back().find('(') == std::string::npos) {
                surface = "X";
                kind = TokenKind::manual_sign;
            }
        }
        // Internal whitespace inside multi-word surfaces gets perturbed too.
        std::string raw_surface;
        for (char c : surface) {
            if (c == ' ') {
                raw_surface += pick(gaps);
            } else {
                raw_surface += c;
            }
        }
        g.raw += raw_surface;
        g.kinds.push_back(kind);
        g.surfaces.push_back(surface);
    }
    if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) g.raw += pick(gaps);
    return g;
}

} // namespace songsign::testing
