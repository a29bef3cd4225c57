#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "songsign/error.hpp"
#include "songsign/model.hpp"
#include "songsign/text_sources.hpp"

namespace songsign {

struct SongQuery {
    std::string title;
    std::string artist;

    // Throws InvalidArgument when either field is blank.
    void validate() const;
};

struct AsrWord {
    std::string surface;
    Millis start_ms = 0;
    Millis duration_ms = 0;

    bool operator==(const AsrWord&) const = default;
};

struct ByteRange {
    std::uint64_t offset = 0;
    std::uint64_t length = 0;

    bool operator==(const ByteRange&) const = default;
};

// Reference audio. Assumed 16-bit PCM WAV with a canonical 44-byte header;
// the file itself may be absent (fixtures usually ship only words.json).
class AudioHandle {
public:
    AudioHandle() = default;
    AudioHandle(std::string key, Millis duration_ms, std::optional<std::filesystem::path> path = std::nullopt,
                int sample_rate = 16000, int channels = 1);

    const std::string& key() const { return key_; }
    Millis duration_ms() const { return duration_ms_; }

    // Byte range of the PCM frames covering [start_ms, end_ms).
    ByteRange byte_range(Millis start_ms, Millis end_ms) const;
    // Reads that range; throws NotFound when there is no backing file.
    std::string read_segment(Millis start_ms, Millis end_ms) const;

private:
    std::string key_;
    Millis duration_ms_ = 0;
    std::optional<std::filesystem::path> path_;
    int sample_rate_ = 16000;
    int channels_ = 1;
};

struct LyricsResult {
    LyricsDocument doc;
    std::string song_description;
    std::string key;
};

struct MediaResult {
    std::string subtitles;
    SubtitleFormat format = SubtitleFormat::vtt;
    std::string subtitle_key;
    AudioHandle audio;
    std::string video_url;
};

class LyricsSource {
public:
    virtual ~LyricsSource() = default;
    // Throws NotFound or Unavailable.
    virtual LyricsResult fetch(const SongQuery& q) = 0;
};

class MediaSource {
public:
    virtual ~MediaSource() = default;
    // Throws NotFound, MissingSubtitles, LiveModeDisabled or Unavailable.
    virtual MediaResult fetch(const SongQuery& q) = 0;
};

class AsrService {
public:
    virtual ~AsrService() = default;
    // Word times relative to start_ms. Throws SegmentOutOfRange or Unavailable.
    virtual std::vector<AsrWord> transcribe_segment(const AudioHandle& audio, Millis start_ms, Millis end_ms) = 0;
};

// fixtures/<song-id>/{meta.json, lyrics.txt, subs.vtt|subs.srt, words.json}
// (layout documented in docs/fixtures.md). Loaded eagerly and immutable
// afterwards, so a catalog can be shared across threads.
class FixtureCatalog {
public:
    struct Entry {
        std::string song_id;
        std::filesystem::path dir;
        std::string title;
        std::string artist;
        std::string description;
        std::string video_url;
        Millis duration_ms = 0;
    };

    explicit FixtureCatalog(std::filesystem::path root);

    const Entry* find(const SongQuery& q) const;
    const Entry* find_by_id(const std::string& song_id) const;
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;
};

class FixtureLyricsSource : public LyricsSource {
public:
    explicit FixtureLyricsSource(std::shared_ptr<const FixtureCatalog> catalog) : catalog_(std::move(catalog)) {}
    LyricsResult fetch(const SongQuery& q) override;

private:
    std::shared_ptr<const FixtureCatalog> catalog_;
};

class FixtureMediaSource : public MediaSource {
public:
    // A fixture miss goes to `live` when live mode is on; otherwise the miss
    // is reported as LiveModeDisabled.
    FixtureMediaSource(std::shared_ptr<const FixtureCatalog> catalog, bool live_enabled,
                       std::shared_ptr<MediaSource> live = nullptr)
        : catalog_(std::move(catalog)), live_enabled_(live_enabled), live_(std::move(live)) {}
    MediaResult fetch(const SongQuery& q) override;

private:
    std::shared_ptr<const FixtureCatalog> catalog_;
    bool live_enabled_;
    std::shared_ptr<MediaSource> live_;
};

class FixtureAsr : public AsrService {
public:
    explicit FixtureAsr(std::shared_ptr<const FixtureCatalog> catalog);
    std::vector<AsrWord> transcribe_segment(const AudioHandle& audio, Millis start_ms, Millis end_ms) override;

private:
    std::shared_ptr<const FixtureCatalog> catalog_;
    std::map<std::string, std::vector<AsrWord>> words_; // absolute times, per song id
};

// Crops absolute-timed words to [start_ms, end_ms) and re-bases them.
std::vector<AsrWord> crop_words(const std::vector<AsrWord>& absolute, Millis start_ms, Millis end_ms);

std::vector<AsrWord> load_words_json(const std::filesystem::path& file);

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

// Calls fn, retrying only on Error{Unavailable} with exponential backoff
// (250 ms, 500 ms, ...). The last Unavailable is rethrown.
template <typename Fn>
auto with_retry(Fn&& fn, const RetryPolicy& policy, const Sleeper& sleep) -> decltype(fn()) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Unavailable || attempt >= policy.attempts) throw;
        }
        sleep(backoff);
        backoff *= 2;
    }
}

class RetryingLyricsSource : public LyricsSource {
public:
    RetryingLyricsSource(std::shared_ptr<LyricsSource> inner, RetryPolicy policy, Sleeper sleep)
        : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleep)) {}
    LyricsResult fetch(const SongQuery& q) override {
        return with_retry([&] { return inner_->fetch(q); }, policy_, sleep_);
    }

private:
    std::shared_ptr<LyricsSource> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

class RetryingMediaSource : public MediaSource {
public:
    RetryingMediaSource(std::shared_ptr<MediaSource> inner, RetryPolicy policy, Sleeper sleep)
        : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleep)) {}
    MediaResult fetch(const SongQuery& q) override {
        return with_retry([&] { return inner_->fetch(q); }, policy_, sleep_);
    }

private:
    std::shared_ptr<MediaSource> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

class RetryingAsr : public AsrService {
public:
    RetryingAsr(std::shared_ptr<AsrService> inner, RetryPolicy policy, Sleeper sleep)
        : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleep)) {}
    std::vector<AsrWord> transcribe_segment(const AudioHandle& audio, Millis start_ms, Millis end_ms) override {
        return with_retry([&] { return inner_->transcribe_segment(audio, start_ms, end_ms); }, policy_, sleep_);
    }

private:
    std::shared_ptr<AsrService> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

struct ClientSet {
    std::shared_ptr<LyricsSource> lyrics;
    std::shared_ptr<MediaSource> media;
    std::shared_ptr<AsrService> asr;
};

struct ClientConfig {
    std::filesystem::path fixtures_dir;
    bool live = false;                      // ELMI_LIVE
    std::optional<std::string> lyrics_api_key; // LYRICS_API_KEY
    std::optional<std::string> media_cookie_file; // MEDIA_COOKIE_FILE
    std::optional<std::string> asr_api_key; // ASR_API_KEY

    static ClientConfig from_env(std::filesystem::path default_fixtures);
};

// Fixture-backed clients wrapped in the retry policy.
ClientSet make_clients(const ClientConfig& config, Sleeper sleep = real_sleeper());

} // namespace songsign
