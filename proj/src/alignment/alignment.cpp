#include "songsign/alignment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <thread>

#include "songsign/json_io.hpp"
#include "songsign/text.hpp"

namespace songsign {

using nlohmann::json;

namespace {

constexpr double kEps = 1e-12;

std::vector<std::string> concat_tokens(const std::vector<std::vector<std::string>>& cue_tokens, int first, int count) {
    std::vector<std::string> out;
    for (int c = first; c < first + count; ++c) out.insert(out.end(), cue_tokens[c].begin(), cue_tokens[c].end());
    return out;
}

std::vector<std::vector<std::string>> tokens_of(const std::vector<SubtitleCue>& cues) {
    std::vector<std::vector<std::string>> out;
    for (const auto& c : cues) out.push_back(word_tokens(c.text));
    return out;
}

std::vector<std::vector<std::string>> tokens_of(const std::vector<LyricLine>& lines) {
    std::vector<std::vector<std::string>> out;
    for (const auto& l : lines) out.push_back(word_tokens(l.text));
    return out;
}

} // namespace

std::string_view to_string(MatchMethod m) {
    constexpr std::string_view names[] = {"exact", "fuzzy", "llm_fallback", "interpolated"};
    return names[static_cast<int>(m)];
}

double word_similarity(std::string_view a, std::string_view b) {
    if (a.empty() && b.empty()) return 1.0;
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return 1.0 - static_cast<double>(prev[b.size()]) / static_cast<double>(std::max(a.size(), b.size()));
}

std::vector<LineMatch> monotone_assignment(const std::vector<std::vector<std::string>>& line_tokens,
                                           const std::vector<std::vector<std::string>>& cue_tokens,
                                           const AlignmentConfig& config) {
    const int n = static_cast<int>(line_tokens.size());
    const int m = static_cast<int>(cue_tokens.size());
    const int cap = std::max(1, config.max_cues_per_line);

    // score[i][j][k-1]: similarity of line i with cues j..j+k-1, or -1 if not acceptable.
    std::vector<std::vector<std::vector<double>>> score(n, std::vector<std::vector<double>>(m));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            for (int k = 1; k <= cap && j + k <= m; ++k) {
                const double s = token_set_similarity(line_tokens[i], concat_tokens(cue_tokens, j, k));
                score[i][j].push_back(s + kEps >= config.fuzzy_threshold ? s : -1.0);
            }
        }
    }

    struct Cell {
        double best = -1.0;
        int from_i = -1, from_j = -1, take = 0; // take > 0: line from_i got cues from_j..from_j+take-1
    };
    std::vector<std::vector<Cell>> dp(n + 1, std::vector<Cell>(m + 1));
    dp[0][0].best = 0.0;
    auto relax = [](Cell& to, double value, int i, int j, int take) {
        if (value > to.best + kEps) to = {value, i, j, take};
    };
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= m; ++j) {
            const Cell& here = dp[i][j];
            if (here.best < 0) continue;
            if (i < n) {
                for (int k = 1; k <= static_cast<int>(score[i].empty() || j >= m ? 0 : score[i][j].size()); ++k) {
                    const double s = score[i][j][k - 1];
                    if (s >= 0) relax(dp[i + 1][j + k], here.best + s, i, j, k);
                }
                relax(dp[i + 1][j], here.best, i, j, 0);
            }
            if (j < m) relax(dp[i][j + 1], here.best, i, j, 0);
        }
    }

    std::vector<LineMatch> out(n);
    for (int i = 0; i < n; ++i) out[i].line_index = i;
    int i = n, j = m;
    while (i > 0 || j > 0) {
        const Cell& c = dp[i][j];
        if (c.take > 0) {
            auto& lm = out[c.from_i];
            for (int k = 0; k < c.take; ++k) lm.cue_indices.push_back(c.from_j + k);
            lm.similarity = score[c.from_i][c.from_j][c.take - 1];
            lm.method = MatchMethod::fuzzy;
        }
        i = c.from_i;
        j = c.from_j;
    }
    return out;
}

std::vector<AmbiguousWindow> ambiguous_windows(const std::vector<LineMatch>& matches, std::size_t cue_count) {
    std::vector<AmbiguousWindow> out;
    const int n = static_cast<int>(matches.size());
    int prev_cue = -1;
    for (int i = 0; i < n;) {
        if (!matches[i].cue_indices.empty()) {
            prev_cue = matches[i].cue_indices.back();
            ++i;
            continue;
        }
        AmbiguousWindow w;
        while (i < n && matches[i].cue_indices.empty()) w.line_indices.push_back(i++);
        const int next_cue = i < n ? matches[i].cue_indices.front() : static_cast<int>(cue_count);
        for (int c = prev_cue + 1; c < next_cue; ++c) w.cue_indices.push_back(c);
        if (!w.cue_indices.empty()) out.push_back(std::move(w));
    }
    return out;
}

bool valid_window_mapping(const AmbiguousWindow& window, const WindowMapping& mapping) {
    int last_line = -1;
    int last_cue = -1;
    for (const auto& [line, cues] : mapping) {
        if (std::find(window.line_indices.begin(), window.line_indices.end(), line) == window.line_indices.end()) {
            return false;
        }
        if (line <= last_line || cues.empty()) return false;
        for (std::size_t k = 0; k < cues.size(); ++k) {
            if (std::find(window.cue_indices.begin(), window.cue_indices.end(), cues[k]) == window.cue_indices.end()) {
                return false;
            }
            if (k > 0 && cues[k] != cues[k - 1] + 1) return false;
        }
        if (cues.front() <= last_cue) return false;
        last_line = line;
        last_cue = cues.back();
    }
    return true;
}

std::optional<WindowMapping> LlmLineMatcher::resolve(const AmbiguousWindow& window, const std::vector<LyricLine>& lines,
                                                     const std::vector<SubtitleCue>& cues) {
    json jl = json::array(), jc = json::array();
    for (int i : window.line_indices) jl.push_back({{"line_index", i}, {"text", lines[i].text}});
    for (int c : window.cue_indices) jc.push_back({{"cue_index", c}, {"text", cues[c].text}});
    const auto& t = PromptCatalog::builtin().get("line_matcher");
    ChatExchange x;
    x.template_id = t.id;
    x.values = {{"lines", jl.dump()}, {"cues", jc.dump()}};
    x.system = render(t, x.values).text;
    x.history = {{Role::user, "Return the mapping."}};

    StructuredSpec spec;
    spec.fields = {{"matches", FieldType::array, true, {}}};
    spec.max_retries = 1;
    spec.validator = [](const json& r) -> std::optional<std::string> {
        for (const auto& m : r.at("matches")) {
            if (!m.is_object() || !m.contains("line_index") || !m["line_index"].is_number_integer() ||
                !m.contains("cue_indices") || !m["cue_indices"].is_array()) {
                return "each match needs integer line_index and cue_indices array";
            }
            for (const auto& c : m["cue_indices"]) {
                if (!c.is_number_integer()) return "cue_indices must be integers";
            }
        }
        return std::nullopt;
    };
    try {
        const auto result = llm_->complete_structured(x, spec);
        WindowMapping mapping;
        for (const auto& m : result.record.at("matches")) {
            auto cues_for_line = m.at("cue_indices").get<std::vector<int>>();
            if (cues_for_line.empty()) continue;
            mapping.emplace_back(m.at("line_index").get<int>(), std::move(cues_for_line));
        }
        return mapping;
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::vector<LineMatch> match_cues_to_lines(const std::vector<SubtitleCue>& cues, const std::vector<LyricLine>& lines,
                                           const AlignmentConfig& config, LineMatchFallback* fallback) {
    if (lines.empty()) throw Error(ErrorCode::EmptyDocument, "lyrics document has no lines");
    const auto line_tokens = tokens_of(lines);
    const auto cue_tokens = tokens_of(cues);
    auto matches = monotone_assignment(line_tokens, cue_tokens, config);
    for (auto& m : matches) {
        if (m.cue_indices.empty()) continue;
        std::vector<std::string> texts;
        for (int c : m.cue_indices) texts.push_back(cues[c].text);
        if (normalize_text(join(texts, " ")) == normalize_text(lines[m.line_index].text)) {
            m.method = MatchMethod::exact;
            m.similarity = 1.0;
        }
    }
    if (!fallback) return matches;
    for (const auto& window : ambiguous_windows(matches, cues.size())) {
        const auto mapping = fallback->resolve(window, lines, cues);
        if (!mapping || !valid_window_mapping(window, *mapping)) continue;
        for (const auto& [line, cue_run] : *mapping) {
            auto& m = matches[line];
            m.cue_indices = cue_run;
            const int first = cue_run.front();
            m.similarity = token_set_similarity(line_tokens[line],
                                                concat_tokens(cue_tokens, first, static_cast<int>(cue_run.size())));
            m.method = MatchMethod::llm_fallback;
        }
    }
    return matches;
}

std::vector<LineMatch> match_cues_to_lines(const std::vector<SubtitleCue>& cues, const LyricsDocument& doc,
                                           const AlignmentConfig& config, LineMatchFallback* fallback) {
    return match_cues_to_lines(cues, lyric_lines(doc), config, fallback);
}

bool is_monotone(const std::vector<LineMatch>& matches) {
    int last = -1;
    for (const auto& m : matches) {
        for (std::size_t k = 0; k < m.cue_indices.size(); ++k) {
            if (k > 0 && m.cue_indices[k] != m.cue_indices[k - 1] + 1) return false;
        }
        if (m.cue_indices.empty()) continue;
        if (m.cue_indices.front() <= last) return false;
        last = m.cue_indices.back();
    }
    return true;
}

std::vector<std::optional<Span>> derive_line_spans(const std::vector<LineMatch>& matches,
                                                   const std::vector<SubtitleCue>& cues,
                                                   const std::vector<LyricLine>& lines, Millis track_end_ms) {
    const int n = static_cast<int>(matches.size());
    std::vector<std::optional<Span>> spans(n);
    std::vector<int> matched;
    for (int i = 0; i < n; ++i) {
        const auto& m = matches[i];
        if (m.cue_indices.empty()) continue;
        Span s{std::numeric_limits<Millis>::max(), std::numeric_limits<Millis>::min()};
        for (int c : m.cue_indices) {
            s.start_ms = std::min(s.start_ms, cues[c].start_ms);
            s.end_ms = std::max(s.end_ms, cues[c].end_ms);
        }
        spans[i] = s;
        matched.push_back(i);
    }

    for (std::size_t k = 1; k < matched.size(); ++k) {
        auto& prev = *spans[matched[k - 1]];
        auto& next = *spans[matched[k]];
        if (prev.end_ms <= next.start_ms) continue;
        const Millis mid = (prev.end_ms + next.start_ms) / 2;
        prev.end_ms = mid;
        next.start_ms = mid;
    }
    for (int i : matched) {
        if (spans[i]->start_ms >= spans[i]->end_ms) spans[i].reset();
    }

    for (int i = 0; i < n;) {
        if (!matches[i].cue_indices.empty()) {
            ++i;
            continue;
        }
        const int first = i;
        while (i < n && matches[i].cue_indices.empty()) ++i;
        Millis gap_start = 0;
        for (int p = first - 1; p >= 0; --p) {
            if (spans[p]) {
                gap_start = spans[p]->end_ms;
                break;
            }
        }
        Millis gap_end = track_end_ms;
        for (int q = i; q < n; ++q) {
            if (spans[q]) {
                gap_end = spans[q]->start_ms;
                break;
            }
        }
        std::vector<Millis> weight;
        Millis total = 0;
        for (int l = first; l < i; ++l) {
            weight.push_back(std::max<Millis>(1, static_cast<Millis>(normalize_text(lines[l].text).size())));
            total += weight.back();
        }
        const Millis width = std::max<Millis>(0, gap_end - gap_start);
        Millis cum = 0;
        for (int l = first; l < i; ++l) {
            const Millis s = gap_start + width * cum / total;
            cum += weight[l - first];
            const Millis e = gap_start + width * cum / total;
            if (s < e) spans[l] = Span{s, e};
        }
    }
    return spans;
}

WordAlignment align_tokens(const std::vector<std::string>& lyric, const std::vector<std::string>& asr,
                           double word_threshold) {
    const std::size_t n = lyric.size(), m = asr.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> sub(n, std::vector<double>(m, inf));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double s = lyric[i] == asr[j] ? 1.0 : word_similarity(lyric[i], asr[j]);
            if (s + kEps >= word_threshold) sub[i][j] = 1.0 - s;
        }
    }
    std::vector<std::vector<double>> d(n + 1, std::vector<double>(m + 1, 0.0));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<double>(i);
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<double>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            d[i][j] = std::min({d[i - 1][j] + 1.0, d[i][j - 1] + 1.0, d[i - 1][j - 1] + sub[i - 1][j - 1]});
        }
    }
    WordAlignment out{std::vector<int>(n, -1), d[n][m]};
    std::size_t i = n, j = m;
    while (i > 0 && j > 0) {
        if (std::abs(d[i][j] - (d[i - 1][j - 1] + sub[i - 1][j - 1])) <= 1e-9) {
            out.lyric_to_asr[i - 1] = static_cast<int>(j - 1);
            --i;
            --j;
        } else if (std::abs(d[i][j] - (d[i][j - 1] + 1.0)) <= 1e-9) {
            --j;
        } else {
            --i;
        }
    }
    return out;
}

std::vector<TimedWord> align_words(const std::string& line_text, const Span& span, const std::vector<AsrWord>& asr,
                                   const AlignmentConfig& config) {
    const auto lyric = word_tokens(line_text);
    std::vector<std::string> asr_tokens;
    std::vector<const AsrWord*> asr_words;
    for (const auto& w : asr) {
        auto t = normalize_text(w.surface);
        if (t.empty()) continue;
        asr_tokens.push_back(std::move(t));
        asr_words.push_back(&w);
    }
    const auto alignment = align_tokens(lyric, asr_tokens, config.word_threshold);

    const std::size_t n = lyric.size();
    std::vector<TimedWord> words(n);
    // Anchors: (position, start). Position n marks the span end.
    std::vector<std::pair<std::size_t, Millis>> anchors;
    for (std::size_t i = 0; i < n; ++i) {
        words[i].surface = lyric[i];
        const int a = alignment.lyric_to_asr[i];
        if (a < 0) continue;
        const AsrWord& w = *asr_words[a];
        const double sim = lyric[i] == asr_tokens[a] ? 1.0 : word_similarity(lyric[i], asr_tokens[a]);
        Millis start = span.start_ms + w.start_ms;
        double confidence = sim;
        if (start < span.start_ms || start >= span.end_ms) {
            start = std::clamp(start, span.start_ms, span.end_ms - 1);
            confidence = std::min(confidence, config.clamped_confidence);
        }
        if (!anchors.empty() && start < anchors.back().second) start = anchors.back().second;
        words[i].start_ms = start;
        words[i].duration_ms = std::clamp<Millis>(w.duration_ms, 0, span.end_ms - start);
        words[i].confidence = confidence;
        words[i].matched = true;
        anchors.emplace_back(i, start);
    }
    if (n > 0 && (anchors.empty() || anchors.front().first != 0) ) anchors.insert(anchors.begin(), {0, span.start_ms});
    anchors.emplace_back(n, span.end_ms);

    for (std::size_t k = 0; k + 1 < anchors.size(); ++k) {
        const auto [p, sp] = anchors[k];
        const auto [q, sq] = anchors[k + 1];
        for (std::size_t i = p; i < q; ++i) {
            if (words[i].matched) continue;
            words[i].start_ms = sp + (sq - sp) * static_cast<Millis>(i - p) / static_cast<Millis>(q - p);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (words[i].matched) continue;
        const Millis next = i + 1 < n ? words[i + 1].start_ms : span.end_ms;
        words[i].duration_ms = std::max<Millis>(0, next - words[i].start_ms);
        words[i].confidence = 0.0;
    }
    return words;
}

void to_json(json& j, const AlignmentReport& r) {
    j = {{"lines_total", r.lines_total},
         {"lines_matched", r.lines_matched},
         {"words_total", r.words_total},
         {"words_matched", r.words_matched},
         {"methods", r.methods}};
}

void to_json(json& j, const LineMatch& m) {
    j = {{"line_index", m.line_index},
         {"cue_indices", m.cue_indices},
         {"similarity", m.similarity},
         {"method", to_string(m.method)}};
}

AlignmentReport make_report(const TimedLyric& lyric, const std::vector<LineMatch>& matches) {
    AlignmentReport r;
    r.lines_total = static_cast<int>(lyric.lines.size());
    for (const auto& m : matches) {
        ++r.methods[std::string(to_string(m.method))];
        if (m.method != MatchMethod::interpolated) ++r.lines_matched;
    }
    for (const auto& l : lyric.lines) {
        r.words_total += static_cast<int>(l.words.size());
        for (const auto& w : l.words) r.words_matched += w.matched ? 1 : 0;
    }
    return r;
}

AlignmentResult build_timed_lyrics(const LyricsDocument& doc, const SubtitleDocument& subtitles,
                                   const AudioHandle& audio, AsrService& asr, const AlignmentConfig& config,
                                   LineMatchFallback* fallback) {
    AlignmentResult result;
    result.lyric.lines = lyric_lines(doc);
    auto& lines = result.lyric.lines;
    if (lines.empty()) throw Error(ErrorCode::EmptyDocument, "lyrics document has no lines");
    const auto& cues = subtitles.cues;
    result.matches = match_cues_to_lines(cues, lines, config, fallback);

    Millis track_end = audio.duration_ms();
    if (track_end <= 0) {
        for (const auto& c : cues) track_end = std::max(track_end, c.end_ms);
    }
    const auto spans = derive_line_spans(result.matches, cues, lines, track_end);
    for (std::size_t i = 0; i < lines.size(); ++i) lines[i].span = spans[i];

    std::vector<std::size_t> to_transcribe;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].span && result.matches[i].method != MatchMethod::interpolated) {
            to_transcribe.push_back(i);
        } else if (lines[i].span) {
            lines[i].words = align_words(lines[i].text, *lines[i].span, {}, config);
        }
    }

    std::vector<std::vector<TimedWord>> words(lines.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mu;
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < to_transcribe.size();) {
            const auto i = to_transcribe[k];
            const auto& span = *lines[i].span;
            try {
                const auto asr_words = asr.transcribe_segment(audio, span.start_ms, span.end_ms);
                words[i] = align_words(lines[i].text, span, asr_words, config);
            } catch (const Error& e) {
                words[i] = align_words(lines[i].text, span, {}, config);
                std::lock_guard lock(error_mu);
                if (!result.error) result.error = e;
            }
        }
    };
    const auto threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, config.asr_concurrency)), 1,
                                                 std::max<std::size_t>(1, to_transcribe.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto i : to_transcribe) lines[i].words = std::move(words[i]);

    result.report = make_report(result.lyric, result.matches);
    return result;
}

std::string export_lrc(const TimedLyric& lyric, const std::string& title, const std::string& artist) {
    std::string out = "[ti:" + title + "]\n[ar:" + artist + "]\n";
    for (const auto& l : lyric.lines) {
        if (!l.span) continue;
        const Millis t = l.span->start_ms;
        char stamp[32];
        std::snprintf(stamp, sizeof stamp, "[%02lld:%02lld.%02lld]", static_cast<long long>(t / 60000),
                      static_cast<long long>(t / 1000 % 60), static_cast<long long>(t % 1000 / 10));
        out += stamp + l.text + "\n";
    }
    return out;
}

} // namespace songsign
