#include <doctest.h>

#include "songsign/clients.hpp"
#include "songsign/util.hpp"

using namespace songsign;

namespace {

std::shared_ptr<const FixtureCatalog> catalog() {
    static auto c = std::make_shared<const FixtureCatalog>(SONGSIGN_FIXTURES_DIR);
    return c;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvalidArgument;
}

class FlakyLyrics : public LyricsSource {
public:
    explicit FlakyLyrics(int failures, ErrorCode code = ErrorCode::Unavailable) : failures_(failures), code_(code) {}
    LyricsResult fetch(const SongQuery&) override {
        ++calls;
        if (calls <= failures_) throw Error(code_, "flaky");
        return {parse_lyrics("Hello"), "", "k"};
    }
    int calls = 0;

private:
    int failures_;
    ErrorCode code_;
};

} // namespace

TEST_CASE("fixture lyrics hit and miss") {
    FixtureLyricsSource src(catalog());
    const auto r = src.fetch({"Butter", "BTS"});
    CHECK(r.doc.line_count() == 19);
    CHECK(r.doc.sections.size() == 3);
    CHECK_FALSE(r.song_description.empty());
    const auto again = src.fetch({"  butter ", "bts"});
    CHECK(again.doc == r.doc);

    CHECK(code_of([&] { src.fetch({"Unknown", "Nobody"}); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { src.fetch({"", "BTS"}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("fixture media: hit, live gate, missing subtitles") {
    FixtureMediaSource src(catalog(), false);
    const auto m = src.fetch({"Butter", "BTS"});
    CHECK(m.format == SubtitleFormat::vtt);
    CHECK(m.subtitle_key == "butter-bts/subs.vtt");
    CHECK(m.audio.key() == "butter-bts");
    CHECK(m.audio.duration_ms() > 0);
    CHECK(m.video_url.find("youtube") != std::string::npos);
    CHECK_FALSE(parse_subtitles(m.subtitles, m.format).cues.empty());

    CHECK(code_of([&] { src.fetch({"Unknown", "Nobody"}); }) == ErrorCode::LiveModeDisabled);
    FixtureMediaSource live(catalog(), true);
    CHECK(code_of([&] { live.fetch({"Unknown", "Nobody"}); }) == ErrorCode::NotFound);

    const auto dir = std::filesystem::temp_directory_path() / "songsign_no_subs";
    std::filesystem::remove_all(dir);
    write_file(dir / "song" / "meta.json", R"({"title":"Quiet","artist":"Nobody","duration_ms":1000})");
    write_file(dir / "song" / "lyrics.txt", "Hush\n");
    FixtureMediaSource bare(std::make_shared<const FixtureCatalog>(dir), false);
    CHECK(code_of([&] { bare.fetch({"Quiet", "Nobody"}); }) == ErrorCode::MissingSubtitles);
    std::filesystem::remove_all(dir);
}

TEST_CASE("crop re-bases word times") {
    const std::vector<AsrWord> words = {{"a", 500, 100}, {"b", 1500, 200}, {"c", 2900, 400}, {"d", 3000, 10}};
    const auto cropped = crop_words(words, 1000, 3000);
    REQUIRE(cropped.size() == 2);
    CHECK(cropped[0] == AsrWord{"b", 500, 200});
    CHECK(cropped[1] == AsrWord{"c", 1900, 100});
    for (const auto& w : cropped) CHECK(1000 + w.start_ms < 3000);

    CHECK(crop_words(words, 1500, 1700) == std::vector<AsrWord>{{"b", 0, 200}});
}

TEST_CASE("fixture asr segments") {
    FixtureAsr asr(catalog());
    const AudioHandle audio("butter-bts", 200000);
    const auto all = load_words_json(std::filesystem::path(SONGSIGN_FIXTURES_DIR) / "butter-bts" / "words.json");
    REQUIRE_FALSE(all.empty());
    const auto& first = all.front();
    const auto seg = asr.transcribe_segment(audio, first.start_ms, first.start_ms + first.duration_ms);
    REQUIRE(seg.size() == 1);
    CHECK(seg[0] == AsrWord{first.surface, 0, first.duration_ms});

    CHECK(asr.transcribe_segment(audio, 0, 5000) == asr.transcribe_segment(audio, 0, 5000));
    CHECK(code_of([&] { asr.transcribe_segment(audio, 3000, 3000); }) == ErrorCode::SegmentOutOfRange);
    CHECK(code_of([&] { asr.transcribe_segment(audio, 3000, 1000); }) == ErrorCode::SegmentOutOfRange);
    CHECK(code_of([&] { asr.transcribe_segment(audio, 0, 300000); }) == ErrorCode::SegmentOutOfRange);
    CHECK(code_of([&] { asr.transcribe_segment(AudioHandle("nope", 1000), 0, 10); }) == ErrorCode::NotFound);
}

TEST_CASE("audio byte ranges") {
    const AudioHandle audio("x", 10000);
    CHECK(audio.byte_range(0, 1000) == ByteRange{44, 32000});
    CHECK(audio.byte_range(1000, 1500) == ByteRange{44 + 32000, 16000});
    const AudioHandle stereo("y", 10000, std::nullopt, 44100, 2);
    CHECK(stereo.byte_range(0, 10) == ByteRange{44, 441 * 4});
    CHECK(code_of([&] { audio.byte_range(9000, 11000); }) == ErrorCode::SegmentOutOfRange);
    CHECK(code_of([&] { audio.read_segment(0, 10); }) == ErrorCode::NotFound);
}

TEST_CASE("retry policy: three attempts, doubling backoff, Unavailable only") {
    std::vector<long long> slept;
    const Sleeper record = [&](std::chrono::milliseconds d) { slept.push_back(d.count()); };

    auto flaky = std::make_shared<FlakyLyrics>(2);
    RetryingLyricsSource ok(flaky, {}, record);
    CHECK(ok.fetch({"a", "b"}).doc.line_count() == 1);
    CHECK(flaky->calls == 3);
    CHECK(slept == std::vector<long long>{250, 500});

    slept.clear();
    auto down = std::make_shared<FlakyLyrics>(10);
    RetryingLyricsSource failing(down, {}, record);
    CHECK(code_of([&] { failing.fetch({"a", "b"}); }) == ErrorCode::Unavailable);
    CHECK(down->calls == 3);
    CHECK(slept == std::vector<long long>{250, 500});

    slept.clear();
    auto missing = std::make_shared<FlakyLyrics>(10, ErrorCode::NotFound);
    RetryingLyricsSource permanent(missing, {}, record);
    CHECK(code_of([&] { permanent.fetch({"a", "b"}); }) == ErrorCode::NotFound);
    CHECK(missing->calls == 1);
    CHECK(slept.empty());
}

TEST_CASE("make_clients wires fixtures behind retries") {
    ClientConfig config;
    config.fixtures_dir = SONGSIGN_FIXTURES_DIR;
    const auto clients = make_clients(config, [](std::chrono::milliseconds) {});
    CHECK(clients.lyrics->fetch({"Dynamite", "BTS"}).doc.line_count() == 4);
    const auto media = clients.media->fetch({"Dynamite", "BTS"});
    CHECK_FALSE(clients.asr->transcribe_segment(media.audio, 0, media.audio.duration_ms()).empty());
}
