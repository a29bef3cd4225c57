#include "songsign/json_io.hpp"

#include "songsign/gloss.hpp"

namespace songsign {

void to_json(json& j, const UserProfile& v) {
    j = {{"nickname", v.nickname}, {"proficiency", to_string(v.proficiency)}};
}
void from_json(const json& j, UserProfile& v) {
    v.nickname = j.at("nickname").get<std::string>();
    v.proficiency = proficiency_from_string(j.value("proficiency", "moderate"));
}

void to_json(json& j, const MediaRefs& v) {
    j = {{"lyrics_key", v.lyrics_key},
         {"subtitle_key", v.subtitle_key},
         {"audio_key", v.audio_key},
         {"video_url", v.video_url}};
}
void from_json(const json& j, MediaRefs& v) {
    v.lyrics_key = j.value("lyrics_key", "");
    v.subtitle_key = j.value("subtitle_key", "");
    v.audio_key = j.value("audio_key", "");
    v.video_url = j.value("video_url", "");
}

void to_json(json& j, const SongProject& v) {
    j = {{"id", v.id},
         {"title", v.title},
         {"artist", v.artist},
         {"sign_language", to_string(v.sign_language)},
         {"user_profile", v.user_profile},
         {"media", v.media},
         {"status", to_string(v.status)},
         {"song_description", v.song_description}};
}
void from_json(const json& j, SongProject& v) {
    v.id = j.at("id").get<std::string>();
    v.title = j.at("title").get<std::string>();
    v.artist = j.at("artist").get<std::string>();
    v.sign_language = sign_language_from_string(j.at("sign_language").get<std::string>());
    v.user_profile = j.at("user_profile").get<UserProfile>();
    v.media = j.value("media", MediaRefs{});
    v.status = project_status_from_string(j.at("status").get<std::string>());
    v.song_description = j.value("song_description", "");
}

void to_json(json& j, const TimedWord& v) {
    j = {{"surface", v.surface},
         {"start_ms", v.start_ms},
         {"duration_ms", v.duration_ms},
         {"confidence", v.confidence},
         {"matched", v.matched}};
}
void from_json(const json& j, TimedWord& v) {
    v.surface = j.at("surface").get<std::string>();
    v.start_ms = j.at("start_ms").get<Millis>();
    v.duration_ms = j.at("duration_ms").get<Millis>();
    v.confidence = j.value("confidence", 0.0);
    v.matched = j.value("matched", false);
}

void to_json(json& j, const LyricLine& v) {
    j = {{"index", v.index}, {"section", v.section}, {"text", v.text}};
    j["span"] = v.span ? json::array({v.span->start_ms, v.span->end_ms}) : json(nullptr);
    j["words"] = v.words;
}
void from_json(const json& j, LyricLine& v) {
    v.index = j.at("index").get<int>();
    v.section = j.value("section", "");
    v.text = j.at("text").get<std::string>();
    const auto& span = j.at("span");
    if (span.is_null()) {
        v.span.reset();
    } else {
        v.span = Span{span.at(0).get<Millis>(), span.at(1).get<Millis>()};
    }
    v.words = j.value("words", std::vector<TimedWord>{});
}

void to_json(json& j, const TimedLyric& v) { j = {{"lines", v.lines}}; }
void from_json(const json& j, TimedLyric& v) { v.lines = j.at("lines").get<std::vector<LyricLine>>(); }

void to_json(json& j, const GlossToken& v) { j = {{"kind", to_string(v.kind)}, {"surface", v.surface}}; }
void from_json(const json& j, GlossToken& v) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "nms") {
        v.kind = TokenKind::nms;
    } else if (kind == "classifier") {
        v.kind = TokenKind::classifier;
    } else if (kind == "fingerspelling") {
        v.kind = TokenKind::fingerspelling;
    } else {
        v.kind = TokenKind::manual_sign;
    }
    v.surface = j.at("surface").get<std::string>();
}

void to_json(json& j, const GlossLine& v) {
    j = {{"line_index", v.line_index}, {"raw", v.raw}, {"version", v.version}, {"authored_at", v.authored_at}};
}
void from_json(const json& j, GlossLine& v) {
    v.line_index = j.at("line_index").get<int>();
    v.raw = j.at("raw").get<std::string>();
    v.version = j.at("version").get<std::int64_t>();
    v.authored_at = j.value("authored_at", "");
    v.tokens = tokenize_gloss(v.raw);
}

void to_json(json& j, const ChallengeNote& v) {
    j = {{"line_index", v.line_index},
         {"kind", to_string(v.kind)},
         {"summary", v.summary},
         {"needs_fingerspelling_hint", v.needs_fingerspelling_hint}};
}
void from_json(const json& j, ChallengeNote& v) {
    v.line_index = j.at("line_index").get<int>();
    v.kind = challenge_kind_from_string(j.at("kind").get<std::string>());
    v.summary = j.value("summary", "");
    v.needs_fingerspelling_hint = j.value("needs_fingerspelling_hint", false);
}

void to_json(json& j, const AltGlosses& v) {
    j = {{"shorter", v.shorter}, {"base_alt", v.base_alt}, {"longer", v.longer}};
}
void from_json(const json& j, AltGlosses& v) {
    v.shorter = j.at("shorter").get<std::string>();
    v.base_alt = j.at("base_alt").get<std::string>();
    v.longer = j.at("longer").get<std::string>();
}

void to_json(json& j, const LineAnnotation& v) {
    j = {{"line_index", v.line_index},
         {"challenge", v.challenge},
         {"base_gloss", v.base_gloss},
         {"alt_glosses", v.alt_glosses},
         {"mood_hashtags", v.mood_hashtags},
         {"performance_guide", v.performance_guide}};
}
void from_json(const json& j, LineAnnotation& v) {
    v.line_index = j.at("line_index").get<int>();
    v.challenge = j.at("challenge").get<ChallengeNote>();
    v.base_gloss = j.value("base_gloss", "");
    v.alt_glosses = j.value("alt_glosses", AltGlosses{});
    v.mood_hashtags = j.value("mood_hashtags", std::vector<std::string>{});
    v.performance_guide = j.value("performance_guide", "");
}

void to_json(json& j, const ChatMessage& v) {
    j = {{"seq", v.seq},
         {"role", to_string(v.role)},
         {"text", v.text},
         {"intent", v.intent ? json(to_string(*v.intent)) : json(nullptr)},
         {"origin", to_string(v.origin)},
         {"flagged", v.flagged}};
}
void from_json(const json& j, ChatMessage& v) {
    v.seq = j.at("seq").get<std::int64_t>();
    v.role = role_from_string(j.at("role").get<std::string>());
    v.text = j.at("text").get<std::string>();
    v.intent.reset();
    if (j.contains("intent") && j["intent"].is_string()) v.intent = intent_from_string(j["intent"].get<std::string>());
    v.origin = origin_from_string(j.at("origin").get<std::string>());
    v.flagged = j.value("flagged", false);
}

void to_json(json& j, const ChatThread& v) {
    j = {{"id", v.id},
         {"project_id", v.project_id},
         {"line_index", v.line_index},
         {"opened_by", to_string(v.opened_by)},
         {"messages", v.messages}};
}
void from_json(const json& j, ChatThread& v) {
    v.id = j.at("id").get<std::string>();
    v.project_id = j.at("project_id").get<std::string>();
    v.line_index = j.at("line_index").get<int>();
    v.opened_by = opener_from_string(j.at("opened_by").get<std::string>());
    v.messages = j.value("messages", std::vector<ChatMessage>{});
}

void to_json(json& j, const JobRecord& v) {
    j = {{"id", v.id},
         {"project_id", v.project_id},
         {"kind", to_string(v.kind)},
         {"status", to_string(v.status)},
         {"stage", v.stage ? json(*v.stage) : json(nullptr)},
         {"error", v.error ? json(*v.error) : json(nullptr)},
         {"created_at", v.created_at},
         {"updated_at", v.updated_at}};
}
void from_json(const json& j, JobRecord& v) {
    v.id = j.at("id").get<std::int64_t>();
    v.project_id = j.at("project_id").get<std::string>();
    v.kind = job_kind_from_string(j.at("kind").get<std::string>());
    v.status = job_status_from_string(j.at("status").get<std::string>());
    v.stage.reset();
    v.error.reset();
    if (j.contains("stage") && j["stage"].is_string()) v.stage = j["stage"].get<std::string>();
    if (j.contains("error") && j["error"].is_string()) v.error = j["error"].get<std::string>();
    v.created_at = j.value("created_at", "");
    v.updated_at = j.value("updated_at", "");
}

} // namespace songsign
