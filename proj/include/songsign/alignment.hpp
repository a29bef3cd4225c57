#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "songsign/clients.hpp"
#include "songsign/error.hpp"
#include "songsign/llm.hpp"
#include "songsign/model.hpp"
#include "songsign/text.hpp"
#include "songsign/text_sources.hpp"

namespace songsign {

struct AlignmentConfig {
    double fuzzy_threshold = 0.60;
    double word_threshold = 0.50;
    // Longest run of consecutive cues one line may claim.
    int max_cues_per_line = 3;
    int asr_concurrency = 4;
    // Confidence given to a matched word whose ASR time fell outside the line.
    double clamped_confidence = 0.5;
};

enum class MatchMethod { exact, fuzzy, llm_fallback, interpolated };
std::string_view to_string(MatchMethod m);

struct LineMatch {
    int line_index = 0;
    std::vector<int> cue_indices; // empty iff interpolated
    double similarity = 0.0;
    MatchMethod method = MatchMethod::interpolated;

    bool operator==(const LineMatch&) const = default;
};

// 1 - levenshtein(a, b) / max(|a|, |b|) over bytes; 1 for two empty strings.
double word_similarity(std::string_view a, std::string_view b);

// Optimal monotone assignment of contiguous cue runs to lines, maximizing the
// summed similarity of accepted pairs (similarity >= fuzzy_threshold, at most
// max_cues_per_line cues each). Lines without a pair come back interpolated.
std::vector<LineMatch> monotone_assignment(const std::vector<std::vector<std::string>>& line_tokens,
                                           const std::vector<std::vector<std::string>>& cue_tokens,
                                           const AlignmentConfig& config);

// Lines with no accepted pair, together with the unclaimed cues between their
// matched neighbours.
struct AmbiguousWindow {
    std::vector<int> line_indices;
    std::vector<int> cue_indices;
};

std::vector<AmbiguousWindow> ambiguous_windows(const std::vector<LineMatch>& matches, std::size_t cue_count);

using WindowMapping = std::vector<std::pair<int, std::vector<int>>>; // line -> cues

// Resolves an ambiguous window; nullopt means no opinion.
class LineMatchFallback {
public:
    virtual ~LineMatchFallback() = default;
    virtual std::optional<WindowMapping> resolve(const AmbiguousWindow& window, const std::vector<LyricLine>& lines,
                                                 const std::vector<SubtitleCue>& cues) = 0;
};

// Asks the LLM (template "line_matcher") for the window mapping. Provider and
// validation failures yield nullopt.
class LlmLineMatcher : public LineMatchFallback {
public:
    explicit LlmLineMatcher(std::shared_ptr<LlmClient> llm) : llm_(std::move(llm)) {}
    std::optional<WindowMapping> resolve(const AmbiguousWindow& window, const std::vector<LyricLine>& lines,
                                         const std::vector<SubtitleCue>& cues) override;

private:
    std::shared_ptr<LlmClient> llm_;
};

// True when every line in the mapping belongs to the window, each cue list is
// a non-empty ascending run of consecutive window cues, and the runs are
// disjoint and ordered like their lines.
bool valid_window_mapping(const AmbiguousWindow& window, const WindowMapping& mapping);

// Fuzzy DP, then the fallback on each ambiguous window.
std::vector<LineMatch> match_cues_to_lines(const std::vector<SubtitleCue>& cues, const std::vector<LyricLine>& lines,
                                           const AlignmentConfig& config = {},
                                           LineMatchFallback* fallback = nullptr);
std::vector<LineMatch> match_cues_to_lines(const std::vector<SubtitleCue>& cues, const LyricsDocument& doc,
                                           const AlignmentConfig& config = {},
                                           LineMatchFallback* fallback = nullptr);

// True when matched cue runs never cross or share cues.
bool is_monotone(const std::vector<LineMatch>& matches);

// Matched lines span their cues; overlapping neighbours are split at the
// midpoint. Each run of unmatched lines shares the gap between its matched
// neighbours (0 and track_end_ms at the edges) in proportion to normalized
// character length. A line whose share rounds to nothing gets no span.
std::vector<std::optional<Span>> derive_line_spans(const std::vector<LineMatch>& matches,
                                                   const std::vector<SubtitleCue>& cues,
                                                   const std::vector<LyricLine>& lines, Millis track_end_ms);

// Edit-distance alignment of ASR words (times relative to span start) to the
// line's lyric words. See docs/alignment.md for costs and interpolation.
std::vector<TimedWord> align_words(const std::string& line_text, const Span& span, const std::vector<AsrWord>& asr,
                                   const AlignmentConfig& config = {});

// Lyric tokens that an edit-distance alignment pairs with ASR tokens:
// result[i] = index into asr_tokens or -1. Exposed for oracle tests.
struct WordAlignment {
    std::vector<int> lyric_to_asr;
    double cost = 0.0;
};
WordAlignment align_tokens(const std::vector<std::string>& lyric_tokens, const std::vector<std::string>& asr_tokens,
                           double word_threshold);

struct AlignmentReport {
    int lines_total = 0;
    int lines_matched = 0;
    int words_total = 0;
    int words_matched = 0;
    std::map<std::string, int> methods;

    bool operator==(const AlignmentReport&) const = default;
};

void to_json(nlohmann::json& j, const AlignmentReport& r);
void to_json(nlohmann::json& j, const LineMatch& m);

struct AlignmentResult {
    TimedLyric lyric;
    AlignmentReport report;
    std::vector<LineMatch> matches;
    // Set when some ASR calls failed; those lines carry interpolated words.
    std::optional<Error> error;
};

// Lyrics + subtitles -> line spans -> one ASR call per matched line (at most
// config.asr_concurrency in flight) -> word times. Throws EmptyDocument.
AlignmentResult build_timed_lyrics(const LyricsDocument& doc, const SubtitleDocument& subtitles,
                                   const AudioHandle& audio, AsrService& asr, const AlignmentConfig& config = {},
                                   LineMatchFallback* fallback = nullptr);

AlignmentReport make_report(const TimedLyric& lyric, const std::vector<LineMatch>& matches);

// "[mm:ss.xx]text" per line with a span, preceded by ti/ar tags.
std::string export_lrc(const TimedLyric& lyric, const std::string& title, const std::string& artist);

} // namespace songsign
