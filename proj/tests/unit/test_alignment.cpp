#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "songsign/alignment.hpp"
#include "songsign/json_io.hpp"
#include "songsign/text.hpp"
#include "songsign/util.hpp"
#include "support/alignment_oracle.hpp"
#include "support/fixture_truth.hpp"

using namespace songsign;
using namespace songsign::testing;

namespace {

std::vector<SubtitleCue> cues_of(const std::vector<std::pair<std::string, Span>>& items) {
    std::vector<SubtitleCue> out;
    for (const auto& [text, span] : items) {
        out.push_back({static_cast<int>(out.size()), span.start_ms, span.end_ms, text});
    }
    return out;
}

std::vector<LyricLine> lines_of(const std::vector<std::string>& texts) {
    std::vector<LyricLine> out;
    for (const auto& t : texts) {
        LyricLine l;
        l.index = static_cast<int>(out.size());
        l.section = "Body";
        l.text = t;
        out.push_back(l);
    }
    return out;
}

double total_similarity(const std::vector<LineMatch>& matches) {
    double s = 0;
    for (const auto& m : matches) {
        if (!m.cue_indices.empty()) s += m.similarity;
    }
    return s;
}

// Plain two-row Levenshtein written for the oracle.
double oracle_word_similarity(const std::string& a, const std::string& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
        }
    }
    return 1.0 - static_cast<double>(d[a.size()][b.size()]) / static_cast<double>(std::max(a.size(), b.size()));
}

class ScriptedFallback : public LineMatchFallback {
public:
    explicit ScriptedFallback(std::optional<WindowMapping> answer) : answer_(std::move(answer)) {}
    std::optional<WindowMapping> resolve(const AmbiguousWindow& w, const std::vector<LyricLine>&,
                                         const std::vector<SubtitleCue>&) override {
        windows.push_back(w);
        return answer_;
    }
    std::vector<AmbiguousWindow> windows;

private:
    std::optional<WindowMapping> answer_;
};

class CountingAsr : public AsrService {
public:
    std::vector<AsrWord> transcribe_segment(const AudioHandle&, Millis start, Millis end) override {
        const int now = ++in_flight;
        int seen = max_in_flight.load();
        while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --in_flight;
        ++calls;
        if (fail) throw Error(ErrorCode::Unavailable, "asr down");
        return {};
    }
    std::atomic<int> in_flight{0}, max_in_flight{0}, calls{0};
    bool fail = false;
};

} // namespace

TEST_CASE("similarities") {
    CHECK(token_set_similarity({"a", "b"}, {"a", "b"}) == 1.0);
    CHECK(token_set_similarity({"a", "a", "b"}, {"a", "c"}) == doctest::Approx(0.4));
    CHECK(token_set_similarity({}, {}) == 0.0);
    CHECK(token_set_similarity({"a"}, {}) == 0.0);
    CHECK(word_similarity("breakin'", "breaking") == doctest::Approx(0.875));
    CHECK(word_similarity("", "") == 1.0);
    CHECK(word_similarity("abc", "xyz") == 0.0);
}

TEST_CASE("match_cues_to_lines examples") {
    const auto lines = lines_of({"Smooth like butter"});
    const auto exact = match_cues_to_lines(cues_of({{"Smooth like butter", {1000, 3500}}}), lines);
    REQUIRE(exact.size() == 1);
    CHECK(exact[0].method == MatchMethod::exact);
    CHECK(exact[0].similarity == 1.0);
    CHECK(exact[0].cue_indices == std::vector<int>{0});

    const auto two = match_cues_to_lines(cues_of({{"smooth like butter smooth like", {0, 1000}}}),
                                         lines_of({"Smooth like butter", "Like a criminal undercover"}));
    CHECK(two[0].method == MatchMethod::fuzzy);
    CHECK(two[0].cue_indices == std::vector<int>{0});
    CHECK(two[1].method == MatchMethod::interpolated);
    CHECK(two[1].cue_indices.empty());

    const auto chorus = match_cues_to_lines(
        cues_of({{"side step right left to my beat", {0, 1}},
                 {"high like the moon", {1, 2}},
                 {"side step right left to my beat", {2, 3}}}),
        lines_of({"Side step, right, left to my beat", "High like the moon", "Side step, right, left to my beat"}));
    CHECK(chorus[0].cue_indices == std::vector<int>{0});
    CHECK(chorus[1].cue_indices == std::vector<int>{1});
    CHECK(chorus[2].cue_indices == std::vector<int>{2});

    const auto split = match_cues_to_lines(cues_of({{"yeah i owe it", {0, 1}}, {"all to my mother", {1, 2}}}),
                                           lines_of({"Yeah, I owe it all to my mother"}));
    CHECK(split[0].cue_indices == std::vector<int>{0, 1});
    CHECK(split[0].method == MatchMethod::exact);

    CHECK_THROWS_AS(match_cues_to_lines({}, std::vector<LyricLine>{}), Error);
}

TEST_CASE("monotone DP equals exhaustive search on small instances") {
    std::mt19937 rng(11);
    const AlignmentConfig config;
    int compared = 0;
    for (int iter = 0; iter < 600; ++iter) {
        const auto inst = random_assignment_instance(rng);
        const auto matches = monotone_assignment(inst.lines, inst.cues, config);
        REQUIRE(matches.size() == inst.lines.size());
        CHECK(is_monotone(matches));
        for (const auto& m : matches) {
            if (m.cue_indices.empty()) continue;
            Tokens run;
            for (int c : m.cue_indices) run.insert(run.end(), inst.cues[c].begin(), inst.cues[c].end());
            CHECK(m.cue_indices.size() <= static_cast<std::size_t>(config.max_cues_per_line));
            CHECK(m.similarity == doctest::Approx(oracle_similarity(inst.lines[m.line_index], run)));
            CHECK(m.similarity >= config.fuzzy_threshold - 1e-9);
        }
        const double oracle = oracle_best_assignment(inst.lines, inst.cues, config.max_cues_per_line,
                                                     config.fuzzy_threshold);
        CHECK(std::abs(total_similarity(matches) - oracle) < 1e-9);
        ++compared;
    }
    CHECK(compared == 600);
}

TEST_CASE("ambiguous windows go to the fallback and are validated") {
    const auto lines = lines_of({"Smooth like butter", "Like a criminal undercover", "Gon' pop like trouble"});
    const auto cues = cues_of({{"smooth like butter", {0, 1000}},
                               {"criminal", {1000, 2000}},
                               {"gon' pop like trouble", {2000, 3000}}});

    const auto windows = ambiguous_windows(match_cues_to_lines(cues, lines), cues.size());
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].line_indices == std::vector<int>{1});
    CHECK(windows[0].cue_indices == std::vector<int>{1});

    ScriptedFallback good(WindowMapping{{1, {1}}});
    const auto resolved = match_cues_to_lines(cues, lines, {}, &good);
    CHECK(good.windows.size() == 1);
    CHECK(resolved[1].method == MatchMethod::llm_fallback);
    CHECK(resolved[1].cue_indices == std::vector<int>{1});
    CHECK(resolved[1].similarity == doctest::Approx(0.4));
    CHECK(is_monotone(resolved));

    ScriptedFallback crossing(WindowMapping{{1, {0}}});
    CHECK(match_cues_to_lines(cues, lines, {}, &crossing)[1].method == MatchMethod::interpolated);
    ScriptedFallback silent(std::nullopt);
    CHECK(match_cues_to_lines(cues, lines, {}, &silent)[1].method == MatchMethod::interpolated);

    const AmbiguousWindow w{{1, 2}, {3, 4, 5}};
    CHECK(valid_window_mapping(w, {{1, {3, 4}}, {2, {5}}}));
    CHECK_FALSE(valid_window_mapping(w, {{1, {3, 5}}}));
    CHECK_FALSE(valid_window_mapping(w, {{1, {4}}, {2, {4}}}));
    CHECK_FALSE(valid_window_mapping(w, {{2, {3}}, {1, {4}}}));
    CHECK_FALSE(valid_window_mapping(w, {{0, {3}}}));
    CHECK_FALSE(valid_window_mapping(w, {{1, {6}}}));
}

TEST_CASE("LLM line matcher uses the line_matcher template") {
    const auto lines = lines_of({"Smooth like butter", "Like a criminal undercover", "Gon' pop like trouble"});
    const auto cues = cues_of({{"smooth like butter", {0, 1000}},
                               {"criminal", {1000, 2000}},
                               {"gon' pop like trouble", {2000, 3000}}});
    const nlohmann::json table = {
        {"entries",
         {{{"template", "line_matcher"},
           {"responses", {nlohmann::json{{"matches", {{{"line_index", 1}, {"cue_indices", {1}}}}}}}}}}}};
    auto recorder = std::make_shared<RecordingProvider>(std::make_shared<MockProvider>(table));
    LlmLineMatcher matcher(std::make_shared<LlmClient>(recorder));
    const auto matches = match_cues_to_lines(cues, lines, {}, &matcher);
    CHECK(matches[1].method == MatchMethod::llm_fallback);
    REQUIRE(recorder->calls().size() == 1);
    CHECK(recorder->calls()[0].values.at("cues").find("criminal") != std::string::npos);

    auto missing = std::make_shared<MockProvider>(nlohmann::json{{"entries", nlohmann::json::array()}});
    LlmLineMatcher broken(std::make_shared<LlmClient>(missing));
    CHECK(match_cues_to_lines(cues, lines, {}, &broken)[1].method == MatchMethod::interpolated);
}

TEST_CASE("derive_line_spans examples") {
    const auto one = derive_line_spans({{0, {0}, 1.0, MatchMethod::exact}}, cues_of({{"a", {1000, 3500}}}),
                                       lines_of({"a"}), 10000);
    CHECK(one[0] == Span{1000, 3500});

    // Matched spans ending 2000 and starting 6000 around interpolated lines.
    const auto cues = cues_of({{"x", {0, 2000}}, {"y", {6000, 8000}}});
    const auto single = derive_line_spans(
        {{0, {0}, 1.0, MatchMethod::exact}, {1, {}, 0, MatchMethod::interpolated}, {2, {1}, 1.0, MatchMethod::exact}},
        cues, lines_of({"x", "abcdefghij", "y"}), 10000);
    CHECK(single[1] == Span{2000, 6000});

    const auto split = derive_line_spans({{0, {0}, 1.0, MatchMethod::exact},
                                          {1, {}, 0, MatchMethod::interpolated},
                                          {2, {}, 0, MatchMethod::interpolated},
                                          {3, {1}, 1.0, MatchMethod::exact}},
                                         cues, lines_of({"x", std::string(10, 'a'), std::string(30, 'b'), "y"}), 10000);
    CHECK(split[1] == Span{2000, 3000});
    CHECK(split[2] == Span{3000, 6000});

    // Leading and trailing runs use the track edges.
    const auto edges = derive_line_spans({{0, {}, 0, MatchMethod::interpolated},
                                          {1, {0}, 1.0, MatchMethod::exact},
                                          {2, {}, 0, MatchMethod::interpolated}},
                                         cues_of({{"m", {4000, 5000}}}), lines_of({"aa", "m", "bb"}), 9000);
    CHECK(edges[0] == Span{0, 4000});
    CHECK(edges[2] == Span{5000, 9000});

    // Overlapping matched neighbours split at the midpoint.
    const auto overlap = derive_line_spans({{0, {0}, 1.0, MatchMethod::exact}, {1, {1}, 1.0, MatchMethod::exact}},
                                           cues_of({{"a", {1000, 3000}}, {"b", {2000, 4000}}}), lines_of({"a", "b"}),
                                           5000);
    CHECK(overlap[0] == Span{1000, 2500});
    CHECK(overlap[1] == Span{2500, 4000});

    // A gap too small to share leaves a line without span.
    const auto tiny = derive_line_spans({{0, {0}, 1.0, MatchMethod::exact},
                                         {1, {}, 0, MatchMethod::interpolated},
                                         {2, {}, 0, MatchMethod::interpolated},
                                         {3, {1}, 1.0, MatchMethod::exact}},
                                        cues_of({{"x", {0, 2000}}, {"y", {2001, 3000}}}),
                                        lines_of({"x", "a", "bbbbbbbbbbbbbbbbbbbb", "y"}), 4000);
    CHECK_FALSE(tiny[1].has_value());
    CHECK(tiny[2] == Span{2000, 2001});
}

TEST_CASE("derived spans are ordered and non-overlapping") {
    std::mt19937 rng(5);
    for (int iter = 0; iter < 300; ++iter) {
        const int m = std::uniform_int_distribution<int>(1, 8)(rng);
        std::vector<std::pair<std::string, Span>> items;
        Millis t = 0;
        for (int c = 0; c < m; ++c) {
            t += std::uniform_int_distribution<int>(-300, 800)(rng);
            t = std::max<Millis>(t, 0);
            const Millis len = std::uniform_int_distribution<int>(200, 2000)(rng);
            items.push_back({"c" + std::to_string(c), {t, t + len}});
            t += len;
        }
        const auto cues = cues_of(items);
        const int n = std::uniform_int_distribution<int>(1, 8)(rng);
        std::vector<std::string> texts;
        for (int i = 0; i < n; ++i) texts.push_back(std::string(static_cast<std::size_t>(1 + i % 5), 'w'));
        std::vector<LineMatch> matches(n);
        int next_cue = 0;
        for (int i = 0; i < n; ++i) {
            matches[i].line_index = i;
            if (next_cue < m && std::uniform_int_distribution<int>(0, 1)(rng)) {
                matches[i].cue_indices = {next_cue++};
                matches[i].method = MatchMethod::fuzzy;
            }
        }
        const auto spans = derive_line_spans(matches, cues, lines_of(texts), t + 1000);
        Millis last_end = 0;
        for (const auto& s : spans) {
            if (!s) continue;
            CHECK(s->start_ms < s->end_ms);
            CHECK(s->start_ms >= last_end);
            last_end = s->end_ms;
        }
    }
}

TEST_CASE("align_words examples") {
    const Span span{1000, 3500};
    const auto same = align_words("Smooth like butter", span, {{"smooth", 0, 400}, {"like", 500, 300}, {"butter", 900, 500}});
    REQUIRE(same.size() == 3);
    for (const auto& w : same) {
        CHECK(w.matched);
        CHECK(w.confidence == 1.0);
    }
    CHECK(same[0].start_ms == 1000);
    CHECK(same[1].start_ms == 1500);
    CHECK(same[2].start_ms == 1900);

    const auto extra = align_words("Smooth like butter", span,
                                   {{"oh", 0, 100}, {"smooth", 200, 400}, {"like", 700, 300}, {"butter", 1100, 500}});
    CHECK(extra[0].surface == "smooth");
    CHECK(extra[0].start_ms == 1200);
    CHECK(extra[2].start_ms == 2100);
    CHECK(extra[0].matched);

    const auto gap = align_words("Smooth like butter", span, {{"smooth", 0, 400}, {"butter", 1000, 500}});
    CHECK_FALSE(gap[1].matched);
    CHECK(gap[1].confidence == 0.0);
    CHECK(gap[1].start_ms == 1500); // midway between 1000 and 2000
    CHECK(gap[1].duration_ms == 500);

    const auto none = align_words("a b c d", Span{0, 4000}, {});
    CHECK(none[0].start_ms == 0);
    CHECK(none[1].start_ms == 1000);
    CHECK(none[3].start_ms == 3000);
    CHECK(none[3].duration_ms == 1000);

    const auto spelled = align_words("Breakin' into your heart", span, {{"breaking", 0, 300}});
    CHECK(spelled[0].matched);
    CHECK(spelled[0].confidence == doctest::Approx(0.875));

    const auto drift = align_words("Smooth like butter", span, {{"smooth", -200, 400}, {"like", 500, 300}, {"butter", 3000, 900}});
    CHECK(drift[0].start_ms == 1000);
    CHECK(drift[0].confidence == 0.5);
    CHECK(drift[2].start_ms == 3499);
    CHECK(drift[2].confidence == 0.5);
    CHECK(drift[2].end_ms() == 3500);
}

TEST_CASE("word alignment cost equals brute-force edit distance") {
    std::mt19937 rng(17);
    const std::vector<std::string> vocab = {"like", "lik", "butter", "budder", "oh", "heart", "hart", "i", "a"};
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int iter = 0; iter < 400; ++iter) {
        Tokens lyric, asr;
        for (int i = pick(0, 5); i > 0; --i) lyric.push_back(vocab[static_cast<std::size_t>(pick(0, 8))]);
        for (int i = pick(0, 5); i > 0; --i) asr.push_back(vocab[static_cast<std::size_t>(pick(0, 8))]);
        const auto a = align_tokens(lyric, asr, 0.5);
        const double oracle = oracle_edit_cost(lyric, asr, 0.5, oracle_word_similarity);
        CHECK(a.cost == doctest::Approx(oracle));
        // The reported pairing is monotone and realizes the cost.
        double cost = 0;
        int last = -1, paired = 0;
        for (std::size_t i = 0; i < lyric.size(); ++i) {
            const int j = a.lyric_to_asr[i];
            if (j < 0) {
                cost += 1;
                continue;
            }
            CHECK(j > last);
            last = j;
            ++paired;
            const double s = oracle_word_similarity(lyric[i], asr[static_cast<std::size_t>(j)]);
            CHECK(s >= 0.5 - 1e-9);
            cost += 1 - s;
        }
        cost += static_cast<double>(asr.size()) - paired;
        CHECK(cost == doctest::Approx(oracle));
    }
}

TEST_CASE("timed words stay inside their line and in order") {
    std::mt19937 rng(23);
    const std::vector<std::string> vocab = {"smooth", "like", "butter", "oh", "hot", "summer", "yeah"};
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<std::string> words;
        for (int i = pick(1, 7); i > 0; --i) words.push_back(vocab[static_cast<std::size_t>(pick(0, 6))]);
        const Span span{pick(0, 5000), 0};
        const Span s{span.start_ms, span.start_ms + pick(1, 4000)};
        std::vector<AsrWord> asr;
        Millis t = pick(-300, 200);
        for (int i = pick(0, 8); i > 0; --i) {
            asr.push_back({vocab[static_cast<std::size_t>(pick(0, 6))], t, pick(0, 600)});
            t += pick(0, 700);
        }
        const auto timed = align_words(join(words, " "), s, asr);
        REQUIRE(timed.size() == words.size());
        Millis last = s.start_ms;
        for (const auto& w : timed) {
            CHECK(w.start_ms >= s.start_ms);
            CHECK(w.end_ms() <= s.end_ms);
            CHECK(w.duration_ms >= 0);
            CHECK(w.start_ms >= last);
            CHECK(w.confidence >= 0.0);
            CHECK(w.confidence <= 1.0);
            if (!w.matched) CHECK(w.confidence == 0.0);
            last = w.start_ms;
        }
    }
}

TEST_CASE("fixture song aligns end to end") {
    const std::filesystem::path dir = std::filesystem::path(SONGSIGN_FIXTURES_DIR) / "butter-bts";
    ClientConfig config;
    config.fixtures_dir = SONGSIGN_FIXTURES_DIR;
    const auto clients = make_clients(config, [](std::chrono::milliseconds) {});
    const auto lyrics = clients.lyrics->fetch({"Butter", "BTS"});
    const auto media = clients.media->fetch({"Butter", "BTS"});
    const auto subs = parse_subtitles(media.subtitles, media.format);

    const auto result = build_timed_lyrics(lyrics.doc, subs, media.audio, *clients.asr);
    CHECK_FALSE(result.error.has_value());
    CHECK(result.report.lines_total == 19);
    CHECK(result.report.lines_matched == 19);
    CHECK(result.report.words_total == 105);
    CHECK(result.report.words_matched >= 100);
    CHECK(is_monotone(result.matches));

    const auto truth = load_ground_truth(dir);
    REQUIRE(truth.size() == result.lyric.lines.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto& line = result.lyric.lines[i];
        REQUIRE(line.span.has_value());
        REQUIRE(line.words.size() == truth[i].words.size());
        for (std::size_t k = 0; k < line.words.size(); ++k) {
            CHECK(line.words[k].surface == truth[i].words[k].surface);
            CHECK(line.span->contains(line.words[k].start_ms));
            if (line.words[k].matched) CHECK(std::llabs(line.words[k].start_ms - truth[i].words[k].start_ms) <= 50);
        }
    }

    const auto again = build_timed_lyrics(lyrics.doc, subs, media.audio, *clients.asr);
    CHECK(nlohmann::json(again.lyric).dump() == nlohmann::json(result.lyric).dump());

    const auto lrc = export_lrc(result.lyric, "Butter", "BTS");
    CHECK(lrc.rfind("[ti:Butter]\n[ar:BTS]\n", 0) == 0);
    CHECK(lrc.find("Smooth like butter\n") != std::string::npos);
}

TEST_CASE("ASR calls are bounded and failures are reported with partial results") {
    std::vector<std::string> texts;
    std::vector<std::pair<std::string, Span>> items;
    for (int i = 0; i < 12; ++i) {
        texts.push_back("line number " + std::to_string(i));
        items.push_back({"line number " + std::to_string(i), {i * 1000, i * 1000 + 900}});
    }
    LyricsDocument doc{{{"Body", texts}}};
    SubtitleDocument subs{cues_of(items), {}};
    CountingAsr asr;
    AlignmentConfig config;
    const auto r = build_timed_lyrics(doc, subs, AudioHandle("x", 20000), asr, config);
    CHECK(asr.calls == 12);
    CHECK(asr.max_in_flight <= config.asr_concurrency);
    CHECK(r.report.words_matched == 0);

    asr.fail = true;
    const auto failed = build_timed_lyrics(doc, subs, AudioHandle("x", 20000), asr, config);
    REQUIRE(failed.error.has_value());
    CHECK(failed.error->code() == ErrorCode::Unavailable);
    for (const auto& l : failed.lyric.lines) CHECK(l.words.size() == 3);

    CHECK_THROWS_AS(build_timed_lyrics(LyricsDocument{}, subs, AudioHandle("x", 1000), asr), Error);
}
