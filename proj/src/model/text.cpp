#include "songsign/text.hpp"

#include <map>

namespace songsign {

namespace {

bool is_word_char(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

// U+2018 / U+2019 in UTF-8.
std::string fold_apostrophes(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (i + 2 < raw.size() && static_cast<unsigned char>(raw[i]) == 0xE2 &&
            static_cast<unsigned char>(raw[i + 1]) == 0x80 &&
            (static_cast<unsigned char>(raw[i + 2]) == 0x98 || static_cast<unsigned char>(raw[i + 2]) == 0x99)) {
            out.push_back('\'');
            i += 2;
        } else {
            out.push_back(raw[i]);
        }
    }
    return out;
}

} // namespace

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string normalize_text(std::string_view raw) {
    const std::string s = fold_apostrophes(raw);
    auto word_at = [&](std::size_t i) { return i < s.size() && is_word_char(static_cast<unsigned char>(s[i])); };

    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        bool keep = false;
        if (is_space(static_cast<char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (is_word_char(c)) {
            keep = true;
        } else if (c == '\'') {
            keep = (i > 0 && word_at(i - 1)) || word_at(i + 1);
        } else if (c == '-') {
            keep = i > 0 && word_at(i - 1) && word_at(i + 1);
        }
        if (!keep) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    }
    return out;
}

std::string normalize_whitespace(std::string_view raw) {
    return join(split_whitespace(raw), " ");
}

std::vector<std::string> split_whitespace(std::string_view raw) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < raw.size()) {
        while (i < raw.size() && is_space(raw[i])) ++i;
        const std::size_t start = i;
        while (i < raw.size() && !is_space(raw[i])) ++i;
        if (i > start) out.emplace_back(raw.substr(start, i - start));
    }
    return out;
}

std::vector<std::string> word_tokens(std::string_view raw) {
    return split_whitespace(normalize_text(raw));
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

double token_set_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::map<std::string_view, int> counts;
    for (const auto& t : a) ++counts[t];
    int common = 0;
    for (const auto& t : b) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    return 2.0 * common / static_cast<double>(a.size() + b.size());
}

} // namespace songsign
