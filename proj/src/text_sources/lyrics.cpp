#include <map>

#include "songsign/error.hpp"
#include "songsign/text.hpp"
#include "songsign/text_sources.hpp"

namespace songsign {

std::size_t LyricsDocument::line_count() const {
    std::size_t n = 0;
    for (const auto& s : sections) n += s.lines.size();
    return n;
}

LyricsDocument parse_lyrics(std::string_view data) {
    if (data.substr(0, 3) == "\xEF\xBB\xBF") data.remove_prefix(3);
    std::vector<LyricsSection> sections;
    sections.push_back({"Body", {}});

    std::size_t pos = 0;
    while (pos < data.size()) {
        auto nl = data.find('\n', pos);
        if (nl == std::string_view::npos) nl = data.size();
        const auto row = normalize_whitespace(data.substr(pos, nl - pos));
        pos = nl + 1;

        if (row.size() >= 2 && row.front() == '[' && row.back() == ']') {
            sections.push_back({normalize_whitespace(row.substr(1, row.size() - 2)), {}});
            continue;
        }
        if (normalize_text(row).empty()) continue;
        sections.back().lines.push_back(row);
    }

    LyricsDocument doc;
    std::map<std::string, int> seen;
    for (auto& s : sections) {
        if (s.lines.empty()) continue;
        const int n = ++seen[s.label];
        if (n > 1) s.label += " (" + std::to_string(n) + ")";
        doc.sections.push_back(std::move(s));
    }
    if (doc.sections.empty()) throw Error(ErrorCode::EmptyDocument, "lyrics document has no lines");
    return doc;
}

std::vector<LyricLine> lyric_lines(const LyricsDocument& doc) {
    std::vector<LyricLine> out;
    for (const auto& s : doc.sections) {
        for (const auto& text : s.lines) {
            LyricLine line;
            line.index = static_cast<int>(out.size());
            line.section = s.label;
            line.text = text;
            out.push_back(std::move(line));
        }
    }
    return out;
}

} // namespace songsign
