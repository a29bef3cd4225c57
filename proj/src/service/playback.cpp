#include "songsign/service.hpp"

namespace songsign {

using nlohmann::json;

std::string_view to_string(PlaybackMode m) { return m == PlaybackMode::global ? "global" : "line_loop"; }

PlaybackMode playback_mode_from_string(std::string_view s) {
    if (s == "global") return PlaybackMode::global;
    if (s == "line_loop" || s == "loop") return PlaybackMode::line_loop;
    throw Error(ErrorCode::InvalidArgument, "mode must be global or line_loop", {{"field", "mode"}});
}

void to_json(json& j, const PlaybackState& s) {
    auto opt = [](const std::optional<int>& v) { return v ? json(*v) : json(nullptr); };
    j = {{"project_id", s.project_id}, {"t_ms", s.t_ms},          {"active_line", opt(s.active_line)},
         {"active_word", opt(s.active_word)}, {"mode", to_string(s.mode)}, {"loop_line", opt(s.loop_line)}};
}

namespace {

std::optional<int> active_word_at(const LyricLine& line, Millis t) {
    std::optional<int> found;
    for (std::size_t k = 0; k < line.words.size(); ++k) {
        if (line.words[k].start_ms > t) break;
        found = static_cast<int>(k);
    }
    return found;
}

} // namespace

PlaybackState resolve_playback(const std::string& project_id, const TimedLyric& lyric, Millis t_ms,
                               PlaybackMode mode, std::optional<int> loop_line) {
    PlaybackState s;
    s.project_id = project_id;
    s.t_ms = t_ms;
    s.mode = mode;

    if (mode == PlaybackMode::line_loop) {
        if (!loop_line) throw Error(ErrorCode::InvalidArgument, "line_loop mode needs a loop line", {{"field", "loop"}});
        if (*loop_line < 0 || *loop_line >= static_cast<int>(lyric.lines.size())) {
            throw Error(ErrorCode::InvalidArgument, "loop line out of range", {{"field", "loop"}, {"value", *loop_line}});
        }
        const auto& line = lyric.lines[static_cast<std::size_t>(*loop_line)];
        if (!line.span || line.span->length() <= 0) {
            throw Error(ErrorCode::InvalidArgument, "loop line has no timing", {{"field", "loop"}, {"value", *loop_line}});
        }
        const Millis len = line.span->length();
        const Millis offset = ((t_ms - line.span->start_ms) % len + len) % len;
        s.t_ms = line.span->start_ms + offset;
        s.loop_line = loop_line;
        s.active_line = loop_line;
        s.active_word = active_word_at(line, s.t_ms);
        return s;
    }

    for (std::size_t i = lyric.lines.size(); i-- > 0;) {
        const auto& line = lyric.lines[i];
        if (line.span && line.span->contains(t_ms)) {
            s.active_line = static_cast<int>(i);
            s.active_word = active_word_at(line, t_ms);
            break;
        }
    }
    return s;
}

} // namespace songsign
