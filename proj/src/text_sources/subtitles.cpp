#include <algorithm>
#include <charconv>
#include <cstdio>

#include "songsign/error.hpp"
#include "songsign/text.hpp"
#include "songsign/text_sources.hpp"

namespace songsign {

namespace {

struct Row {
    int number; // 1-based line number in the source
    std::string_view text;
};

std::vector<Row> split_rows(std::string_view data) {
    if (data.substr(0, 3) == "\xEF\xBB\xBF") data.remove_prefix(3);
    std::vector<Row> rows;
    int number = 1;
    std::size_t pos = 0;
    while (pos <= data.size()) {
        auto nl = data.find('\n', pos);
        if (nl == std::string_view::npos) nl = data.size();
        auto row = data.substr(pos, nl - pos);
        if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
        rows.push_back({number++, row});
        if (nl == data.size()) break;
        pos = nl + 1;
    }
    return rows;
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return is_space(c); });
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

bool parse_int(std::string_view s, long long& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

std::string decode_entities(std::string_view s) {
    static const std::pair<std::string_view, std::string_view> entities[] = {
        {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&nbsp;", " "}, {"&quot;", "\""}, {"&#39;", "'"}, {"&apos;", "'"},
        {"&lrm;", ""},  {"&rlm;", ""},
    };
    std::string out;
    for (std::size_t i = 0; i < s.size();) {
        bool replaced = false;
        if (s[i] == '&') {
            for (const auto& [from, to] : entities) {
                if (s.substr(i, from.size()) == from) {
                    out += to;
                    i += from.size();
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) out.push_back(s[i++]);
    }
    return out;
}

// Drops <...> markup (including VTT inline timestamps) and {\...} override
// blocks that some SRT writers emit.
std::string strip_tags(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '<') {
            const auto close = s.find('>', i);
            if (close != std::string_view::npos) {
                i = close;
                continue;
            }
        }
        if (s[i] == '{' && i + 1 < s.size() && s[i + 1] == '\\') {
            const auto close = s.find('}', i);
            if (close != std::string_view::npos) {
                i = close;
                continue;
            }
        }
        out.push_back(s[i]);
    }
    return out;
}

[[noreturn]] void malformed(const Row& row, std::string_view why) {
    throw Error(ErrorCode::MalformedTimestamp,
                "line " + std::to_string(row.number) + ": " + std::string(why) + ": '" + std::string(row.text) + "'",
                {{"line", row.number}});
}

struct Timing {
    Millis start;
    Millis end;
};

Timing parse_timing(const Row& row) {
    const auto arrow = row.text.find("-->");
    const auto left = trim(row.text.substr(0, arrow));
    auto right = trim(row.text.substr(arrow + 3));
    // VTT cue settings follow the end timestamp.
    const auto space = right.find_first_of(" \t");
    if (space != std::string_view::npos) right = right.substr(0, space);
    const Millis start = parse_timestamp(left);
    const Millis end = parse_timestamp(right);
    if (start < 0 || end < 0) malformed(row, "bad timestamp");
    if (end < start) malformed(row, "cue ends before it starts");
    return {start, end};
}

} // namespace

std::string_view to_string(SubtitleFormat f) { return f == SubtitleFormat::vtt ? "vtt" : "srt"; }

SubtitleFormat subtitle_format_from_string(std::string_view s) {
    if (s == "vtt" || s == "webvtt") return SubtitleFormat::vtt;
    if (s == "srt") return SubtitleFormat::srt;
    throw Error(ErrorCode::InvalidArgument, "unsupported subtitle format '" + std::string(s) + "'");
}

Millis parse_timestamp(std::string_view text) {
    // [hh:]mm:ss(.|,)mmm
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        const auto colon = text.find(':', pos);
        parts.push_back(text.substr(pos, colon == std::string_view::npos ? text.npos : colon - pos));
        if (colon == std::string_view::npos) break;
        pos = colon + 1;
    }
    if (parts.size() < 2 || parts.size() > 3) return -1;
    const auto sec_part = parts.back();
    const auto sep = sec_part.find_first_of(".,");
    if (sep == std::string_view::npos) return -1;
    long long h = 0, m = 0, s = 0, frac = 0;
    if (parts.size() == 3 && !parse_int(parts[0], h)) return -1;
    if (!parse_int(parts[parts.size() - 2], m)) return -1;
    if (!parse_int(sec_part.substr(0, sep), s)) return -1;
    const auto frac_text = sec_part.substr(sep + 1);
    if (frac_text.empty() || frac_text.size() > 3 || !parse_int(frac_text, frac)) return -1;
    for (std::size_t i = frac_text.size(); i < 3; ++i) frac *= 10;
    if (h < 0 || m < 0 || m > 59 || s < 0 || s > 59) return -1;
    return ((h * 60 + m) * 60 + s) * 1000 + frac;
}

std::string format_timestamp(Millis ms, SubtitleFormat format) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld%c%03lld", static_cast<long long>(ms / 3600000),
                  static_cast<long long>(ms / 60000 % 60), static_cast<long long>(ms / 1000 % 60),
                  format == SubtitleFormat::vtt ? '.' : ',', static_cast<long long>(ms % 1000));
    return buf;
}

SubtitleDocument parse_subtitles(std::string_view data, SubtitleFormat format) {
    const auto rows = split_rows(data);
    SubtitleDocument doc;
    std::vector<SubtitleCue> cues;

    std::size_t i = 0;
    if (format == SubtitleFormat::vtt) {
        while (i < rows.size() && blank(rows[i].text)) ++i;
        if (i < rows.size() && rows[i].text.substr(0, 6) == "WEBVTT") {
            while (i < rows.size() && !blank(rows[i].text)) ++i;
        }
    }

    while (i < rows.size()) {
        while (i < rows.size() && blank(rows[i].text)) ++i;
        if (i >= rows.size()) break;
        const std::size_t block_start = i;
        std::size_t block_end = i;
        while (block_end < rows.size() && !blank(rows[block_end].text)) ++block_end;
        i = block_end;

        const auto first = trim(rows[block_start].text);
        if (format == SubtitleFormat::vtt &&
            (first.substr(0, 4) == "NOTE" || first == "STYLE" || first == "REGION")) {
            continue;
        }
        std::size_t timing_row = block_start;
        while (timing_row < block_end && rows[timing_row].text.find("-->") == std::string_view::npos) ++timing_row;
        if (timing_row == block_end) {
            // SRT index or VTT identifier without a timing line.
            long long ignored = 0;
            if (format == SubtitleFormat::srt && parse_int(first, ignored)) {
                malformed(rows[std::min(block_start + 1, rows.size() - 1)], "missing timing line");
            }
            doc.warnings.push_back("line " + std::to_string(rows[block_start].number) + ": block without timing skipped");
            continue;
        }
        if (timing_row - block_start > 1) malformed(rows[timing_row], "unexpected rows before timing");
        const auto timing = parse_timing(rows[timing_row]);

        std::vector<std::string> text_rows;
        for (std::size_t r = timing_row + 1; r < block_end; ++r) {
            auto row_text = normalize_whitespace(decode_entities(strip_tags(rows[r].text)));
            if (!row_text.empty()) text_rows.push_back(std::move(row_text));
        }
        const auto text = join(text_rows, " ");
        if (text.empty()) {
            doc.warnings.push_back("line " + std::to_string(rows[timing_row].number) + ": empty cue skipped");
            continue;
        }
        if (timing.end == timing.start) {
            doc.warnings.push_back("line " + std::to_string(rows[timing_row].number) + ": zero-length cue skipped");
            continue;
        }
        cues.push_back({0, timing.start, timing.end, text});
    }

    std::stable_sort(cues.begin(), cues.end(),
                     [](const SubtitleCue& a, const SubtitleCue& b) { return a.start_ms < b.start_ms; });

    for (auto& cue : cues) {
        if (!doc.cues.empty()) {
            auto& prev = doc.cues.back();
            if (prev.text == cue.text && cue.start_ms <= prev.end_ms) {
                prev.end_ms = std::max(prev.end_ms, cue.end_ms);
                continue;
            }
            if (cue.start_ms < prev.end_ms) {
                doc.warnings.push_back("cue " + std::to_string(doc.cues.size()) + " overlaps cue " +
                                       std::to_string(doc.cues.size() - 1));
            }
        }
        cue.index = static_cast<int>(doc.cues.size());
        doc.cues.push_back(std::move(cue));
    }

    if (doc.cues.empty()) throw Error(ErrorCode::EmptyDocument, "subtitle document has no cues");
    return doc;
}

std::string serialize_subtitles(const std::vector<SubtitleCue>& cues, SubtitleFormat format) {
    std::string out;
    if (format == SubtitleFormat::vtt) out += "WEBVTT\n\n";
    for (std::size_t i = 0; i < cues.size(); ++i) {
        if (format == SubtitleFormat::srt) out += std::to_string(i + 1) + "\n";
        out += format_timestamp(cues[i].start_ms, format) + " --> " + format_timestamp(cues[i].end_ms, format) + "\n";
        for (char c : cues[i].text) {
            if (c == '&') {
                out += "&amp;";
            } else if (c == '<') {
                out += "&lt;";
            } else if (c == '>') {
                out += "&gt;";
            } else {
                out.push_back(c);
            }
        }
        out += "\n\n";
    }
    return out;
}

} // namespace songsign
