#pragma once

#include <nlohmann/json.hpp>

#include "songsign/model.hpp"

// nlohmann ADL hooks for the domain aggregates. Field names follow the
// documented export formats (docs/export-formats.md).
namespace songsign {

using nlohmann::json;

void to_json(json& j, const UserProfile& v);
void from_json(const json& j, UserProfile& v);
void to_json(json& j, const MediaRefs& v);
void from_json(const json& j, MediaRefs& v);
void to_json(json& j, const SongProject& v);
void from_json(const json& j, SongProject& v);

void to_json(json& j, const TimedWord& v);
void from_json(const json& j, TimedWord& v);
void to_json(json& j, const LyricLine& v);
void from_json(const json& j, LyricLine& v);
void to_json(json& j, const TimedLyric& v);
void from_json(const json& j, TimedLyric& v);

void to_json(json& j, const GlossToken& v);
void from_json(const json& j, GlossToken& v);
void to_json(json& j, const GlossLine& v);
void from_json(const json& j, GlossLine& v);

void to_json(json& j, const ChallengeNote& v);
void from_json(const json& j, ChallengeNote& v);
void to_json(json& j, const AltGlosses& v);
void from_json(const json& j, AltGlosses& v);
void to_json(json& j, const LineAnnotation& v);
void from_json(const json& j, LineAnnotation& v);

void to_json(json& j, const ChatMessage& v);
void from_json(const json& j, ChatMessage& v);
void to_json(json& j, const ChatThread& v);
void from_json(const json& j, ChatThread& v);

void to_json(json& j, const JobRecord& v);
void from_json(const json& j, JobRecord& v);

} // namespace songsign
