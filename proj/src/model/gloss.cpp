#include "songsign/gloss.hpp"

#include <cctype>

#include "songsign/error.hpp"
#include "songsign/text.hpp"

namespace songsign {

namespace {

[[noreturn]] void unbalanced(char opener, std::size_t offset) {
    throw Error(ErrorCode::UnbalancedBracket,
                std::string("unclosed '") + opener + "' at byte " + std::to_string(offset),
                {{"offset", offset}, {"bracket", std::string(1, opener)}});
}

bool is_quote(char c) { return c == '\'' || c == '"' || c == '`'; }

class Scanner {
public:
    explicit Scanner(std::string_view src) : src_(src) {}

    bool done() const { return pos_ >= src_.size(); }
    char peek() const { return src_[pos_]; }
    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }

    void skip_space() {
        while (!done() && is_space(peek())) ++pos_;
    }

    // Returns the end (one past the closer) of a group opened at pos_.
    std::size_t group_end(char open, char close) const {
        int depth = 0;
        for (std::size_t i = pos_; i < src_.size(); ++i) {
            if (src_[i] == open) {
                ++depth;
            } else if (src_[i] == close && --depth == 0) {
                return i + 1;
            }
        }
        unbalanced(open, pos_);
    }

    // A bare word: runs to whitespace or '[' at paren depth zero.
    std::size_t word_end() const {
        std::size_t i = pos_;
        int depth = 0;
        std::size_t paren_open = 0;
        while (i < src_.size()) {
            const char c = src_[i];
            if (depth == 0 && (is_space(c) || c == '[')) break;
            if (c == '(') {
                if (depth == 0) paren_open = i;
                ++depth;
            } else if (c == ')' && depth > 0) {
                --depth;
            }
            ++i;
        }
        if (depth > 0) unbalanced('(', paren_open);
        return i;
    }

    // Quoted run starting at pos_ (which must be a quote char); npos if the
    // quote never closes.
    std::size_t quote_end() const {
        const char q = src_[pos_];
        std::size_t i = pos_ + 1;
        // LaTeX-style ``...'' or ``..." openers.
        if (q == '`') {
            while (i < src_.size() && src_[i] == '`') ++i;
            for (std::size_t j = i; j < src_.size(); ++j) {
                if (src_[j] == '"' || src_[j] == '\'') return j + 1;
            }
            return std::string_view::npos;
        }
        const auto close = src_.find(q, i);
        return close == std::string_view::npos ? close : close + 1;
    }

    std::string_view slice(std::size_t from, std::size_t to) const { return src_.substr(from, to - from); }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

// Attaches an optional "(descriptor)" following the current token, skipping
// whitespace. Returns the new token end.
std::size_t attach_descriptor(Scanner& sc, std::size_t end) {
    sc.seek(end);
    sc.skip_space();
    if (!sc.done() && sc.peek() == '(') {
        const auto close = sc.group_end('(', ')');
        sc.seek(close);
        return close;
    }
    sc.seek(end);
    return end;
}

std::size_t attach_quoted(Scanner& sc, std::size_t end) {
    sc.seek(end);
    sc.skip_space();
    if (!sc.done() && is_quote(sc.peek())) {
        const auto close = sc.quote_end();
        if (close != std::string_view::npos) {
            sc.seek(close);
            return close;
        }
    }
    sc.seek(end);
    return end;
}

} // namespace

bool has_classifier_prefix(std::string_view word) {
    for (std::string_view p : kClassifierPrefixes) {
        if (word.substr(0, p.size()) != p) continue;
        if (word.size() == p.size()) return true;
        const char next = word[p.size()];
        if (next == ':' || next == '-' || next == '(' || is_quote(next) ||
            std::isdigit(static_cast<unsigned char>(next))) {
            return true;
        }
    }
    return false;
}

std::vector<GlossToken> tokenize_gloss(std::string_view raw) {
    std::vector<GlossToken> tokens;
    Scanner sc(raw);
    while (true) {
        sc.skip_space();
        if (sc.done()) break;
        const std::size_t start = sc.pos();
        const char c = sc.peek();
        TokenKind kind = TokenKind::manual_sign;
        std::size_t end = 0;

        if (c == '[') {
            kind = TokenKind::nms;
            end = sc.group_end('[', ']');
        } else if (c == '(') {
            end = sc.group_end('(', ')');
        } else {
            end = sc.word_end();
            const auto word = sc.slice(start, end);
            if (word.substr(0, 3) == "F-S") {
                kind = TokenKind::fingerspelling;
                if (word.find('(') == std::string_view::npos) end = attach_descriptor(sc, end);
                if (word.size() == 3 || word.find_first_of("'\"`", 3) == std::string_view::npos) {
                    end = attach_quoted(sc, end);
                }
            } else if (has_classifier_prefix(word)) {
                kind = TokenKind::classifier;
                if (word.find('(') == std::string_view::npos) end = attach_descriptor(sc, end);
            }
        }
        tokens.push_back({kind, normalize_whitespace(sc.slice(start, end))});
        sc.seek(end);
    }
    return tokens;
}

std::string render_gloss(const std::vector<GlossToken>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i].surface;
    }
    return out;
}

GlossMetrics gloss_metrics(const std::vector<GlossToken>& tokens) {
    GlossMetrics m;
    for (const auto& t : tokens) {
        if (t.kind == TokenKind::manual_sign || t.kind == TokenKind::fingerspelling) {
            ++m.sign_count;
        } else {
            ++m.nms_count;
        }
    }
    return m;
}

std::set<std::string> manual_sign_set(const std::vector<GlossToken>& tokens) {
    std::set<std::string> out;
    for (const auto& t : tokens) {
        if (t.kind != TokenKind::manual_sign && t.kind != TokenKind::fingerspelling) continue;
        auto norm = normalize_text(t.surface);
        if (!norm.empty()) out.insert(std::move(norm));
    }
    return out;
}

} // namespace songsign
