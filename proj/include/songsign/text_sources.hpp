#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "songsign/model.hpp"

namespace songsign {

enum class SubtitleFormat { vtt, srt };

std::string_view to_string(SubtitleFormat f);
SubtitleFormat subtitle_format_from_string(std::string_view s);

struct SubtitleCue {
    int index = 0;
    Millis start_ms = 0;
    Millis end_ms = 0;
    std::string text;

    bool operator==(const SubtitleCue&) const = default;
};

struct SubtitleDocument {
    std::vector<SubtitleCue> cues;
    std::vector<std::string> warnings;
};

// Parses WebVTT or SubRip. Cues come back sorted by start and re-indexed from
// zero; styling tags and entities are removed and multi-row text is joined
// with single spaces. Consecutive cues with identical text whose spans touch
// or overlap (caption roll-up) are merged. Overlaps between distinct cues are
// kept and reported in `warnings`.
//
// Throws Error{MalformedTimestamp} (details: line) or Error{EmptyDocument}.
SubtitleDocument parse_subtitles(std::string_view data, SubtitleFormat format);

std::string serialize_subtitles(const std::vector<SubtitleCue>& cues, SubtitleFormat format);

// "HH:MM:SS.mmm" / "MM:SS.mmm" (VTT) or "HH:MM:SS,mmm" (SRT). Returns -1 when
// the text is not a timestamp.
Millis parse_timestamp(std::string_view text);
std::string format_timestamp(Millis ms, SubtitleFormat format);

struct LyricsSection {
    std::string label;
    std::vector<std::string> lines;

    bool operator==(const LyricsSection&) const = default;
};

struct LyricsDocument {
    std::vector<LyricsSection> sections;

    std::size_t line_count() const;
    bool operator==(const LyricsDocument&) const = default;
};

// "[Label]" rows open sections; rows before any header land in "Body".
// Blank rows (and rows with nothing left after normalize_text) are skipped,
// empty sections dropped, and repeated labels suffixed " (2)", " (3)", ...
// Throws Error{EmptyDocument}.
LyricsDocument parse_lyrics(std::string_view data);

// Flattens a document into LyricLines with 0-based indices and no timing.
std::vector<LyricLine> lyric_lines(const LyricsDocument& doc);

} // namespace songsign
