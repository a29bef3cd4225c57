#include "songsign/clients.hpp"

#include <algorithm>
#include <thread>

#include <nlohmann/json.hpp>

#include "songsign/text.hpp"
#include "songsign/util.hpp"

namespace songsign {

namespace fs = std::filesystem;

void SongQuery::validate() const {
    if (normalize_whitespace(title).empty() || normalize_whitespace(artist).empty()) {
        throw Error(ErrorCode::InvalidArgument, "song query needs both title and artist");
    }
}

AudioHandle::AudioHandle(std::string key, Millis duration_ms, std::optional<fs::path> path, int sample_rate,
                         int channels)
    : key_(std::move(key)), duration_ms_(duration_ms), path_(std::move(path)), sample_rate_(sample_rate),
      channels_(channels) {}

ByteRange AudioHandle::byte_range(Millis start_ms, Millis end_ms) const {
    if (start_ms < 0 || start_ms >= end_ms || end_ms > duration_ms_) {
        throw Error(ErrorCode::SegmentOutOfRange, "segment outside audio",
                    {{"start_ms", start_ms}, {"end_ms", end_ms}, {"duration_ms", duration_ms_}});
    }
    constexpr std::uint64_t header = 44;
    const std::uint64_t frame_bytes = 2ull * static_cast<std::uint64_t>(channels_);
    auto frame_at = [&](Millis ms) { return static_cast<std::uint64_t>(ms) * static_cast<std::uint64_t>(sample_rate_) / 1000; };
    const auto first = frame_at(start_ms);
    const auto last = frame_at(end_ms);
    return {header + first * frame_bytes, (last - first) * frame_bytes};
}

std::string AudioHandle::read_segment(Millis start_ms, Millis end_ms) const {
    const auto range = byte_range(start_ms, end_ms);
    if (!path_) throw Error(ErrorCode::NotFound, "audio '" + key_ + "' has no backing file");
    const auto all = read_file(*path_);
    if (range.offset >= all.size()) return {};
    return all.substr(range.offset, std::min<std::uint64_t>(range.length, all.size() - range.offset));
}

FixtureCatalog::FixtureCatalog(fs::path root) {
    if (!fs::is_directory(root)) return;
    std::vector<fs::path> dirs;
    for (const auto& d : fs::directory_iterator(root)) {
        if (d.is_directory() && fs::exists(d.path() / "meta.json")) dirs.push_back(d.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        const auto meta = nlohmann::json::parse(read_file(dir / "meta.json"));
        Entry e;
        e.song_id = dir.filename().string();
        e.dir = dir;
        e.title = meta.at("title").get<std::string>();
        e.artist = meta.at("artist").get<std::string>();
        e.description = meta.value("description", "");
        e.video_url = meta.value("video_url", "");
        e.duration_ms = meta.value("duration_ms", Millis{0});
        entries_.push_back(std::move(e));
    }
}

const FixtureCatalog::Entry* FixtureCatalog::find(const SongQuery& q) const {
    const auto title = normalize_text(q.title);
    const auto artist = normalize_text(q.artist);
    for (const auto& e : entries_) {
        if (normalize_text(e.title) == title && normalize_text(e.artist) == artist) return &e;
    }
    return nullptr;
}

const FixtureCatalog::Entry* FixtureCatalog::find_by_id(const std::string& song_id) const {
    for (const auto& e : entries_) {
        if (e.song_id == song_id) return &e;
    }
    return nullptr;
}

LyricsResult FixtureLyricsSource::fetch(const SongQuery& q) {
    q.validate();
    const auto* e = catalog_->find(q);
    if (!e) {
        throw Error(ErrorCode::NotFound, "no lyrics for '" + q.title + "' by " + q.artist,
                    {{"title", q.title}, {"artist", q.artist}});
    }
    return {parse_lyrics(read_file(e->dir / "lyrics.txt")), e->description, e->song_id + "/lyrics.txt"};
}

MediaResult FixtureMediaSource::fetch(const SongQuery& q) {
    q.validate();
    const auto* e = catalog_->find(q);
    if (!e) {
        if (!live_enabled_) {
            throw Error(ErrorCode::LiveModeDisabled,
                        "'" + q.title + "' is not in the fixtures and live retrieval is disabled (ELMI_LIVE=0)");
        }
        if (live_) return live_->fetch(q);
        throw Error(ErrorCode::NotFound, "no media for '" + q.title + "' by " + q.artist);
    }
    MediaResult r;
    for (auto fmt : {SubtitleFormat::vtt, SubtitleFormat::srt}) {
        const auto file = e->dir / ("subs." + std::string(to_string(fmt)));
        if (fs::exists(file)) {
            r.subtitles = read_file(file);
            r.format = fmt;
            r.subtitle_key = e->song_id + "/" + file.filename().string();
            break;
        }
    }
    if (r.subtitle_key.empty()) {
        throw Error(ErrorCode::MissingSubtitles, "no subtitles for '" + q.title + "'", {{"song_id", e->song_id}});
    }
    std::optional<fs::path> wav;
    if (fs::exists(e->dir / "audio.wav")) wav = e->dir / "audio.wav";
    r.audio = AudioHandle(e->song_id, e->duration_ms, wav);
    r.video_url = e->video_url;
    return r;
}

std::vector<AsrWord> load_words_json(const fs::path& file) {
    const auto j = nlohmann::json::parse(read_file(file));
    std::vector<AsrWord> words;
    for (const auto& w : j) {
        words.push_back({w.at("surface").get<std::string>(), w.at("start_ms").get<Millis>(),
                         w.at("duration_ms").get<Millis>()});
    }
    std::stable_sort(words.begin(), words.end(),
                     [](const AsrWord& a, const AsrWord& b) { return a.start_ms < b.start_ms; });
    return words;
}

FixtureAsr::FixtureAsr(std::shared_ptr<const FixtureCatalog> catalog) : catalog_(std::move(catalog)) {
    for (const auto& e : catalog_->entries()) {
        if (fs::exists(e.dir / "words.json")) words_[e.song_id] = load_words_json(e.dir / "words.json");
    }
}

std::vector<AsrWord> crop_words(const std::vector<AsrWord>& absolute, Millis start_ms, Millis end_ms) {
    std::vector<AsrWord> out;
    for (const auto& w : absolute) {
        if (w.start_ms < start_ms || w.start_ms >= end_ms) continue;
        const Millis rel = w.start_ms - start_ms;
        out.push_back({w.surface, rel, std::min(w.duration_ms, end_ms - w.start_ms)});
    }
    return out;
}

std::vector<AsrWord> FixtureAsr::transcribe_segment(const AudioHandle& audio, Millis start_ms, Millis end_ms) {
    if (start_ms < 0 || start_ms >= end_ms || (audio.duration_ms() > 0 && end_ms > audio.duration_ms())) {
        throw Error(ErrorCode::SegmentOutOfRange, "segment outside audio",
                    {{"start_ms", start_ms}, {"end_ms", end_ms}, {"duration_ms", audio.duration_ms()}});
    }
    const auto it = words_.find(audio.key());
    if (it == words_.end()) throw Error(ErrorCode::NotFound, "no transcript fixture for '" + audio.key() + "'");
    return crop_words(it->second, start_ms, end_ms);
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ClientConfig ClientConfig::from_env(fs::path default_fixtures) {
    ClientConfig c;
    c.fixtures_dir = env_or("ELMI_FIXTURES", default_fixtures.string());
    c.live = env_or("ELMI_LIVE", "0") == "1";
    if (auto v = env_or("LYRICS_API_KEY", ""); !v.empty()) c.lyrics_api_key = v;
    if (auto v = env_or("MEDIA_COOKIE_FILE", ""); !v.empty()) c.media_cookie_file = v;
    if (auto v = env_or("ASR_API_KEY", ""); !v.empty()) c.asr_api_key = v;
    return c;
}

ClientSet make_clients(const ClientConfig& config, Sleeper sleep) {
    auto catalog = std::make_shared<const FixtureCatalog>(config.fixtures_dir);
    RetryPolicy policy;
    ClientSet set;
    set.lyrics = std::make_shared<RetryingLyricsSource>(std::make_shared<FixtureLyricsSource>(catalog), policy, sleep);
    set.media = std::make_shared<RetryingMediaSource>(std::make_shared<FixtureMediaSource>(catalog, config.live),
                                                      policy, sleep);
    set.asr = std::make_shared<RetryingAsr>(std::make_shared<FixtureAsr>(catalog), policy, sleep);
    return set;
}

} // namespace songsign
