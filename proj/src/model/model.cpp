#include "songsign/model.hpp"

#include <array>
#include <utility>

#include "songsign/error.hpp"

namespace songsign {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<E, std::string_view>, N>& table,
             std::string_view what) {
    for (const auto& [value, name] : table) {
        if (name == s) return value;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown " + std::string(what) + ": '" + std::string(s) + "'",
                {{"field", what}, {"value", s}});
}

template <typename E, std::size_t N>
std::string_view name_of(E v, const std::array<std::pair<E, std::string_view>, N>& table) {
    for (const auto& [value, name] : table) {
        if (value == v) return name;
    }
    return "?";
}

constexpr std::array<std::pair<SignLanguage, std::string_view>, 2> kSignLanguages{{
    {SignLanguage::ASL, "ASL"},
    {SignLanguage::PSE, "PSE"},
}};
constexpr std::array<std::pair<Proficiency, std::string_view>, 4> kProficiencies{{
    {Proficiency::novice, "novice"},
    {Proficiency::moderate, "moderate"},
    {Proficiency::fluent, "fluent"},
    {Proficiency::native, "native"},
}};
constexpr std::array<std::pair<ProjectStatus, std::string_view>, 4> kProjectStatuses{{
    {ProjectStatus::created, "created"},
    {ProjectStatus::preprocessing, "preprocessing"},
    {ProjectStatus::ready, "ready"},
    {ProjectStatus::failed, "failed"},
}};
constexpr std::array<std::pair<TokenKind, std::string_view>, 4> kTokenKinds{{
    {TokenKind::manual_sign, "manual_sign"},
    {TokenKind::nms, "nms"},
    {TokenKind::classifier, "classifier"},
    {TokenKind::fingerspelling, "fingerspelling"},
}};
constexpr std::array<std::pair<ChallengeKind, std::string_view>, 4> kChallengeKinds{{
    {ChallengeKind::poetic, "poetic"},
    {ChallengeKind::cultural, "cultural"},
    {ChallengeKind::mismatch, "mismatch"},
    {ChallengeKind::none, "none"},
}};
constexpr std::array<std::pair<Intent, std::string_view>, 4> kIntents{{
    {Intent::Meaning, "Meaning"},
    {Intent::Glossing, "Glossing"},
    {Intent::Emoting, "Emoting"},
    {Intent::Timing, "Timing"},
}};
constexpr std::array<std::pair<Role, std::string_view>, 2> kRoles{{
    {Role::user, "user"},
    {Role::assistant, "assistant"},
}};
constexpr std::array<std::pair<MessageOrigin, std::string_view>, 4> kOrigins{{
    {MessageOrigin::shortcut, "shortcut"},
    {MessageOrigin::manual, "manual"},
    {MessageOrigin::proactive, "proactive"},
    {MessageOrigin::reply, "reply"},
}};
constexpr std::array<std::pair<ThreadOpener, std::string_view>, 2> kOpeners{{
    {ThreadOpener::user, "user"},
    {ThreadOpener::proactive, "proactive"},
}};
constexpr std::array<std::pair<JobKind, std::string_view>, 2> kJobKinds{{
    {JobKind::alignment, "alignment"},
    {JobKind::preprocess, "preprocess"},
}};
constexpr std::array<std::pair<JobStatus, std::string_view>, 4> kJobStatuses{{
    {JobStatus::pending, "pending"},
    {JobStatus::running, "running"},
    {JobStatus::done, "done"},
    {JobStatus::failed, "failed"},
}};

} // namespace

std::string_view to_string(SignLanguage v) { return name_of(v, kSignLanguages); }
std::string_view to_string(Proficiency v) { return name_of(v, kProficiencies); }
std::string_view to_string(ProjectStatus v) { return name_of(v, kProjectStatuses); }
std::string_view to_string(TokenKind v) { return name_of(v, kTokenKinds); }
std::string_view to_string(ChallengeKind v) { return name_of(v, kChallengeKinds); }
std::string_view to_string(Intent v) { return name_of(v, kIntents); }
std::string_view to_string(Role v) { return name_of(v, kRoles); }
std::string_view to_string(MessageOrigin v) { return name_of(v, kOrigins); }
std::string_view to_string(ThreadOpener v) { return name_of(v, kOpeners); }
std::string_view to_string(JobKind v) { return name_of(v, kJobKinds); }
std::string_view to_string(JobStatus v) { return name_of(v, kJobStatuses); }

SignLanguage sign_language_from_string(std::string_view s) { return parse_enum(s, kSignLanguages, "sign_language"); }
Proficiency proficiency_from_string(std::string_view s) { return parse_enum(s, kProficiencies, "proficiency"); }
ProjectStatus project_status_from_string(std::string_view s) { return parse_enum(s, kProjectStatuses, "status"); }
ChallengeKind challenge_kind_from_string(std::string_view s) { return parse_enum(s, kChallengeKinds, "kind"); }
Role role_from_string(std::string_view s) { return parse_enum(s, kRoles, "role"); }
MessageOrigin origin_from_string(std::string_view s) { return parse_enum(s, kOrigins, "origin"); }
ThreadOpener opener_from_string(std::string_view s) { return parse_enum(s, kOpeners, "opened_by"); }
JobKind job_kind_from_string(std::string_view s) { return parse_enum(s, kJobKinds, "job kind"); }
JobStatus job_status_from_string(std::string_view s) { return parse_enum(s, kJobStatuses, "job status"); }

std::optional<Intent> intent_from_string(std::string_view s) {
    for (const auto& [value, name] : kIntents) {
        if (name == s) return value;
    }
    return std::nullopt;
}

bool is_valid_transition(ProjectStatus from, ProjectStatus to) {
    switch (from) {
    case ProjectStatus::created: return to == ProjectStatus::preprocessing;
    case ProjectStatus::preprocessing: return to == ProjectStatus::ready || to == ProjectStatus::failed;
    case ProjectStatus::failed: return to == ProjectStatus::preprocessing;
    case ProjectStatus::ready: return to == ProjectStatus::preprocessing;
    }
    return false;
}

void SongProject::transition(ProjectStatus to) {
    if (!is_valid_transition(status, to)) {
        throw Error(ErrorCode::InvalidTransition,
                    "project " + id + ": cannot move from " + std::string(to_string(status)) + " to " +
                        std::string(to_string(to)),
                    {{"from", to_string(status)}, {"to", to_string(to)}});
    }
    status = to;
}

bool is_valid_transition(JobStatus from, JobStatus to) {
    switch (from) {
    case JobStatus::pending: return to == JobStatus::running;
    case JobStatus::running: return to == JobStatus::done || to == JobStatus::failed;
    case JobStatus::done:
    case JobStatus::failed: return false;
    }
    return false;
}

} // namespace songsign
