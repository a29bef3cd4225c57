#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace songsign {

using Millis = std::int64_t;

enum class SignLanguage { ASL, PSE };
enum class Proficiency { novice, moderate, fluent, native };
enum class ProjectStatus { created, preprocessing, ready, failed };

std::string_view to_string(SignLanguage v);
std::string_view to_string(Proficiency v);
std::string_view to_string(ProjectStatus v);
SignLanguage sign_language_from_string(std::string_view s);
Proficiency proficiency_from_string(std::string_view s);
ProjectStatus project_status_from_string(std::string_view s);

// created -> preprocessing -> {ready, failed}. A failed project may be
// re-entered into preprocessing to resume.
bool is_valid_transition(ProjectStatus from, ProjectStatus to);

struct UserProfile {
    std::string nickname;
    Proficiency proficiency = Proficiency::moderate;

    bool operator==(const UserProfile&) const = default;
};

struct MediaRefs {
    std::string lyrics_key;
    std::string subtitle_key;
    std::string audio_key;
    std::string video_url;

    bool operator==(const MediaRefs&) const = default;
};

struct SongProject {
    std::string id;
    std::string title;
    std::string artist;
    SignLanguage sign_language = SignLanguage::ASL;
    UserProfile user_profile;
    MediaRefs media;
    ProjectStatus status = ProjectStatus::created;
    std::string song_description;

    // Throws InvalidTransition when the move is not allowed.
    void transition(ProjectStatus to);

    bool operator==(const SongProject&) const = default;
};

struct Span {
    Millis start_ms = 0;
    Millis end_ms = 0;

    Millis length() const { return end_ms - start_ms; }
    bool contains(Millis t) const { return t >= start_ms && t < end_ms; }
    bool operator==(const Span&) const = default;
};

struct TimedWord {
    std::string surface;
    Millis start_ms = 0;
    Millis duration_ms = 0;
    double confidence = 0.0;
    bool matched = false;

    Millis end_ms() const { return start_ms + duration_ms; }
    bool operator==(const TimedWord&) const = default;
};

struct LyricLine {
    int index = 0;
    std::string section;
    std::string text;
    std::optional<Span> span;
    std::vector<TimedWord> words;

    bool operator==(const LyricLine&) const = default;
};

struct TimedLyric {
    std::vector<LyricLine> lines;

    bool operator==(const TimedLyric&) const = default;
};

enum class TokenKind { manual_sign, nms, classifier, fingerspelling };
std::string_view to_string(TokenKind k);

struct GlossToken {
    TokenKind kind = TokenKind::manual_sign;
    std::string surface;

    bool operator==(const GlossToken&) const = default;
};

struct GlossLine {
    int line_index = 0;
    std::string raw;
    std::vector<GlossToken> tokens;
    std::int64_t version = 0;
    std::string authored_at; // RFC 3339

    bool operator==(const GlossLine&) const = default;
};

struct GlossMetrics {
    int sign_count = 0;
    int nms_count = 0;

    bool operator==(const GlossMetrics&) const = default;
};

enum class ChallengeKind { poetic, cultural, mismatch, none };
std::string_view to_string(ChallengeKind k);
ChallengeKind challenge_kind_from_string(std::string_view s);

struct ChallengeNote {
    int line_index = 0;
    ChallengeKind kind = ChallengeKind::none;
    std::string summary;
    bool needs_fingerspelling_hint = false;

    bool operator==(const ChallengeNote&) const = default;
};

struct AltGlosses {
    std::string shorter;
    std::string base_alt;
    std::string longer;

    bool operator==(const AltGlosses&) const = default;
};

struct LineAnnotation {
    int line_index = 0;
    ChallengeNote challenge;
    std::string base_gloss;
    AltGlosses alt_glosses;
    std::vector<std::string> mood_hashtags;
    std::string performance_guide;

    bool operator==(const LineAnnotation&) const = default;
};

enum class Intent { Meaning, Glossing, Emoting, Timing };
std::string_view to_string(Intent v);
std::optional<Intent> intent_from_string(std::string_view s);

enum class Role { user, assistant };
enum class MessageOrigin { shortcut, manual, proactive, reply };
std::string_view to_string(Role v);
std::string_view to_string(MessageOrigin v);
Role role_from_string(std::string_view s);
MessageOrigin origin_from_string(std::string_view s);

struct ChatMessage {
    std::int64_t seq = 0;
    Role role = Role::user;
    std::string text;
    std::optional<Intent> intent;
    MessageOrigin origin = MessageOrigin::manual;
    // Set on assistant messages that were produced by a fallback path
    // (classifier default, canned apology) and may be retried.
    bool flagged = false;

    bool operator==(const ChatMessage&) const = default;
};

enum class ThreadOpener { user, proactive };
std::string_view to_string(ThreadOpener v);
ThreadOpener opener_from_string(std::string_view s);

struct ChatThread {
    std::string id;
    std::string project_id;
    int line_index = 0;
    std::vector<ChatMessage> messages;
    ThreadOpener opened_by = ThreadOpener::user;

    bool operator==(const ChatThread&) const = default;
};

enum class JobKind { alignment, preprocess };
enum class JobStatus { pending, running, done, failed };
std::string_view to_string(JobKind v);
std::string_view to_string(JobStatus v);
JobKind job_kind_from_string(std::string_view s);
JobStatus job_status_from_string(std::string_view s);

struct JobRecord {
    std::int64_t id = 0;
    std::string project_id;
    JobKind kind = JobKind::alignment;
    JobStatus status = JobStatus::pending;
    std::optional<std::string> stage;
    std::optional<std::string> error;
    std::string created_at;
    std::string updated_at;

    bool operator==(const JobRecord&) const = default;
};

bool is_valid_transition(JobStatus from, JobStatus to);

} // namespace songsign
