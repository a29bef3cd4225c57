#include "songsign/chat.hpp"

#include <algorithm>
#include <cctype>

#include "songsign/gloss.hpp"
#include "songsign/text.hpp"

namespace songsign {

const char* const kApologyText =
    "Sorry, I could not reach the assistant just now. Please send your message again in a moment.";

namespace {

constexpr const char* kTimingFallback =
    "This line works best with a version that matches its pace. Try the shorter gloss if yours feels rushed.";

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string inspection_text(const LineContext& ctx) {
    if (!ctx.annotation) return "not available yet";
    const auto& n = ctx.annotation->challenge;
    if (n.kind == ChallengeKind::none) return "no challenge noted";
    std::string out = std::string(to_string(n.kind)) + ": " + n.summary;
    if (n.needs_fingerspelling_hint) out += " (consider fingerspelling)";
    return out;
}

Values common_values(const LineContext& ctx) {
    const auto& p = ctx.project;
    return {{"title", p.title},
            {"artist", p.artist},
            {"user name", p.user_profile.nickname},
            {"proficiency", std::string(to_string(p.user_profile.proficiency))},
            {"sign language", std::string(to_string(p.sign_language))},
            {"lyric line", ctx.line.text}};
}

std::size_t safe_token_count(const std::string& gloss) {
    try {
        return tokenize_gloss(gloss).size();
    } catch (const Error&) {
        return split_whitespace(gloss).size();
    }
}

std::vector<Turn> history_of(const std::vector<ChatMessage>& messages) {
    std::vector<Turn> turns;
    for (const auto& m : messages) turns.push_back({m.role, m.text});
    // A proactive thread starts with the assistant; give the model a user
    // turn to answer so roles still alternate.
    if (!turns.empty() && turns.front().role == Role::assistant) {
        turns.insert(turns.begin(), Turn{Role::user, "I opened this line. Please start the discussion."});
    }
    return truncate_history(turns);
}

// Clears the busy mark on scope exit.
class BusyGuard {
public:
    BusyGuard(std::mutex& mu, std::set<std::string>& busy, std::string id) : mu_(mu), busy_(busy), id_(std::move(id)) {
        std::lock_guard lock(mu_);
        if (!busy_.insert(id_).second) {
            throw Error(ErrorCode::Busy, "a turn is already in progress on thread " + id_, {{"thread_id", id_}});
        }
    }
    ~BusyGuard() {
        std::lock_guard lock(mu_);
        busy_.erase(id_);
    }
    BusyGuard(const BusyGuard&) = delete;
    BusyGuard& operator=(const BusyGuard&) = delete;

private:
    std::mutex& mu_;
    std::set<std::string>& busy_;
    std::string id_;
};

} // namespace

void MemoryChatBackend::put_context(LineContext ctx) {
    std::lock_guard lock(mu_);
    const auto key = std::make_pair(ctx.project.id, ctx.line.index);
    contexts_[key] = std::move(ctx);
}

void MemoryChatBackend::set_user_gloss(const std::string& project_id, int line_index, std::optional<std::string> gloss) {
    std::lock_guard lock(mu_);
    contexts_.at({project_id, line_index}).user_gloss = std::move(gloss);
}

LineContext MemoryChatBackend::line_context(const std::string& project_id, int line_index) {
    std::lock_guard lock(mu_);
    const auto it = contexts_.find({project_id, line_index});
    if (it == contexts_.end()) {
        throw Error(ErrorCode::NotFound, "no line " + std::to_string(line_index) + " in project " + project_id);
    }
    return it->second;
}

std::optional<ChatThread> MemoryChatBackend::find_thread(const std::string& thread_id) {
    std::lock_guard lock(mu_);
    const auto it = threads_.find(thread_id);
    if (it == threads_.end()) return std::nullopt;
    return it->second;
}

void MemoryChatBackend::create_thread(const ChatThread& thread) {
    std::lock_guard lock(mu_);
    if (!threads_.emplace(thread.id, thread).second) {
        throw Error(ErrorCode::ThreadExists, "thread already exists: " + thread.id, {{"thread_id", thread.id}});
    }
}

ChatMessage MemoryChatBackend::append_message(const std::string& thread_id, ChatMessage message) {
    std::lock_guard lock(mu_);
    auto& t = threads_.at(thread_id);
    message.seq = static_cast<std::int64_t>(t.messages.size()) + 1;
    t.messages.push_back(message);
    return message;
}

std::string thread_id_for(const std::string& project_id, int line_index) {
    return project_id + "-L" + std::to_string(line_index);
}

std::string_view template_for(Intent intent, bool has_user_gloss) {
    switch (intent) {
    case Intent::Meaning: return "meaning";
    case Intent::Glossing: return has_user_gloss ? "glossing_refine" : "glossing_base";
    case Intent::Emoting: return has_user_gloss ? "emoting_refine" : "emoting_base";
    case Intent::Timing: return has_user_gloss ? "timing_refine" : "timing_base";
    }
    return "meaning";
}

std::optional<Intent> parse_intent(std::string_view reply) {
    const std::string text = lower(reply);
    std::optional<Intent> best;
    std::size_t best_pos = std::string::npos;
    for (Intent i : {Intent::Meaning, Intent::Glossing, Intent::Emoting, Intent::Timing}) {
        const std::string name = lower(to_string(i));
        for (std::size_t pos = text.find(name); pos != std::string::npos; pos = text.find(name, pos + 1)) {
            const bool left = pos == 0 || !std::isalpha(static_cast<unsigned char>(text[pos - 1]));
            const std::size_t end = pos + name.size();
            const bool right = end == text.size() || !std::isalpha(static_cast<unsigned char>(text[end]));
            if (left && right) {
                if (pos < best_pos) {
                    best_pos = pos;
                    best = i;
                }
                break;
            }
        }
    }
    return best;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        auto s = normalize_whitespace(cur);
        if (!s.empty()) out.push_back(std::move(s));
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            flush();
            continue;
        }
        cur += c;
        if (c == '.' || c == '!' || c == '?') {
            while (i + 1 < text.size() && (text[i + 1] == '.' || text[i + 1] == '!' || text[i + 1] == '?')) cur += text[++i];
            if (i + 1 == text.size() || is_space(text[i + 1])) flush();
        }
    }
    flush();
    return out;
}

std::size_t count_questions(std::string_view text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '?'));
}

bool has_digit(std::string_view text) {
    return std::any_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string limit_questions(std::string_view text, std::size_t max_questions) {
    std::vector<std::string> kept;
    std::size_t used = 0;
    for (auto& s : split_sentences(text)) {
        const auto q = count_questions(s);
        if (q == 0) {
            kept.push_back(std::move(s));
        } else if (used + q <= max_questions) {
            used += q;
            kept.push_back(std::move(s));
        }
    }
    return join(kept, " ");
}

std::string drop_digit_sentences(std::string_view text) {
    std::vector<std::string> kept;
    for (auto& s : split_sentences(text)) {
        if (!has_digit(s)) kept.push_back(std::move(s));
    }
    return join(kept, " ");
}

std::string describe_pace(const LyricLine& line, std::size_t gloss_tokens) {
    if (!line.span || line.span->length() <= 0) return "at a pace that has not been measured yet";
    const auto per_token = line.span->length() / static_cast<Millis>(std::max<std::size_t>(gloss_tokens, 1));
    if (per_token < 450) return "quickly, leaving little time for each sign";
    if (per_token < 900) return "at a comfortable pace";
    return "slowly, with room to stretch each sign";
}

IntentDecision ChatEngine::classify_intent(const std::string& message, const LyricLine& line) {
    const auto& t = PromptCatalog::builtin().get("intent_classifier");
    ChatExchange x;
    x.template_id = t.id;
    x.values = {{"lyric line", line.text}, {"message", message}};
    x.system = render(t, x.values).text;
    x.history = {{Role::user, message}};
    try {
        // Called on the provider directly: exactly one call, no retry.
        const auto reply = llm_->provider().complete(ChatRequest{x, prompt_digest(x.template_id, x.values), 0});
        if (auto intent = parse_intent(reply)) return {*intent, false};
    } catch (const Error&) {
    }
    return {Intent::Meaning, true};
}

std::string ChatEngine::reply_with_persona(const ChatExchange& x, Intent intent, int& regenerations) {
    auto violates = [&](const std::string& s) { return count_questions(s) > 2 || (intent == Intent::Timing && has_digit(s)); };
    std::string text = llm_->complete(x, 0);
    if (violates(text)) {
        ++regenerations;
        text = llm_->complete(x, 1);
    }
    if (count_questions(text) > 2) text = limit_questions(text);
    if (intent == Intent::Timing && has_digit(text)) {
        text = drop_digit_sentences(text);
        if (text.empty()) text = kTimingFallback;
    }
    return text;
}

ChatThread ChatEngine::open_thread(const std::string& project_id, int line_index, bool proactive) {
    const auto ctx = backend_->line_context(project_id, line_index);
    ChatThread thread;
    thread.id = thread_id_for(project_id, line_index);
    thread.project_id = project_id;
    thread.line_index = line_index;
    thread.opened_by = proactive ? ThreadOpener::proactive : ThreadOpener::user;
    if (backend_->find_thread(thread.id)) {
        throw Error(ErrorCode::ThreadExists, "line " + std::to_string(line_index) + " already has a thread",
                    {{"thread_id", thread.id}});
    }
    if (!proactive) {
        backend_->create_thread(thread);
        return thread;
    }
    if (!ctx.annotation) throw Error(ErrorCode::NotReady, "line inspection has not finished");
    const auto& note = ctx.annotation->challenge;
    if (note.kind == ChallengeKind::none) {
        throw Error(ErrorCode::NotNoteworthy, "line " + std::to_string(line_index) + " has no flagged challenge",
                    {{"line_index", line_index}});
    }
    const auto& t = PromptCatalog::builtin().get("proactive_opener");
    ChatExchange x;
    x.template_id = t.id;
    x.values = common_values(ctx);
    x.values["challenge kind"] = std::string(to_string(note.kind));
    x.values["challenge summary"] = note.summary;
    x.system = render(t, x.values).text;
    x.history = {{Role::user, "I opened this line. Please start the discussion."}};
    x.temperature = Temperature::creative;

    ChatMessage opener;
    opener.role = Role::assistant;
    opener.origin = MessageOrigin::proactive;
    opener.intent = Intent::Meaning;
    try {
        int regenerations = 0;
        opener.text = reply_with_persona(x, Intent::Meaning, regenerations);
    } catch (const Error&) {
        opener.text = kApologyText;
        opener.flagged = true;
    }
    backend_->create_thread(thread);
    thread.messages.push_back(backend_->append_message(thread.id, opener));
    return thread;
}

ChatThread ChatEngine::get_thread(const std::string& thread_id) {
    auto t = backend_->find_thread(thread_id);
    if (!t) throw Error(ErrorCode::NotFound, "no thread " + thread_id, {{"thread_id", thread_id}});
    return *t;
}

TurnResult ChatEngine::handle_turn(const std::string& thread_id, const UserInput& input) {
    BusyGuard guard(busy_mu_, busy_, thread_id);
    auto thread = get_thread(thread_id);
    const auto ctx = backend_->line_context(thread.project_id, thread.line_index);

    std::string text = normalize_whitespace(input.text);
    if (!input.shortcut && text.empty()) throw Error(ErrorCode::InvalidArgument, "message text is empty");

    IntentDecision decision;
    if (input.shortcut) {
        decision.intent = *input.shortcut;
        if (text.empty()) text = std::string(to_string(*input.shortcut));
    } else {
        decision = classify_intent(text, ctx.line);
    }

    TurnResult result;
    ChatMessage user;
    user.role = Role::user;
    user.text = text;
    user.intent = decision.intent;
    user.origin = input.shortcut ? MessageOrigin::shortcut : MessageOrigin::manual;
    result.user = backend_->append_message(thread_id, user);
    thread.messages.push_back(result.user);

    const bool has_gloss = ctx.user_gloss.has_value() && !normalize_whitespace(*ctx.user_gloss).empty();
    const auto& t = PromptCatalog::builtin().get(template_for(decision.intent, has_gloss));
    result.template_id = t.id;

    ChatExchange x;
    x.template_id = t.id;
    x.values = common_values(ctx);
    x.temperature = Temperature::creative;
    const auto& a = ctx.annotation;
    const std::string base = a ? a->base_gloss : "not available yet";
    if (has_gloss) x.values["user gloss"] = *ctx.user_gloss;
    switch (decision.intent) {
    case Intent::Meaning: x.values["inspection"] = inspection_text(ctx); break;
    case Intent::Glossing:
        x.values["inspection"] = inspection_text(ctx);
        x.values["base gloss"] = base;
        break;
    case Intent::Emoting:
        x.values["mood"] = a ? join(a->mood_hashtags, " ") : "not available yet";
        x.values["performance guide"] = a ? a->performance_guide : "not available yet";
        if (!has_gloss) x.values["base gloss"] = base;
        break;
    case Intent::Timing:
        x.values["pace"] = describe_pace(ctx.line, safe_token_count(has_gloss ? *ctx.user_gloss : base));
        x.values["shorter"] = a ? a->alt_glosses.shorter : "not available yet";
        x.values["longer"] = a ? a->alt_glosses.longer : "not available yet";
        if (!has_gloss) x.values["base gloss"] = base;
        break;
    }
    x.system = render(t, x.values).text;
    if (decision.intent == Intent::Meaning) {
        x.system += "\n\nLine inspection results: " + x.values["inspection"];
        if (has_gloss) x.system += "\n\nThe user's current gloss: " + *ctx.user_gloss;
    }
    x.history = history_of(thread.messages);

    ChatMessage reply;
    reply.role = Role::assistant;
    reply.origin = MessageOrigin::reply;
    reply.intent = decision.intent;
    reply.flagged = decision.fallback;
    try {
        reply.text = reply_with_persona(x, decision.intent, result.regenerations);
    } catch (const Error&) {
        reply.text = kApologyText;
        reply.flagged = true;
    }
    result.assistant = backend_->append_message(thread_id, reply);
    return result;
}

std::vector<std::string> suggest_inline(const std::optional<LineAnnotation>& annotation, std::string_view partial) {
    if (!annotation) throw Error(ErrorCode::NotReady, "preprocessing has not finished for this line");
    const auto& a = *annotation;
    const std::string typed = normalize_whitespace(partial);
    std::vector<std::string> out;
    auto add = [&](const std::string& s) {
        const auto n = normalize_whitespace(s);
        if (n.empty() || std::find(out.begin(), out.end(), n) != out.end()) return;
        out.push_back(n);
    };
    if (typed.empty()) {
        add(a.alt_glosses.base_alt);
        add(a.alt_glosses.shorter);
        return out;
    }
    const auto typed_tokens = split_whitespace(upper(typed));
    std::vector<std::string> candidates;
    for (const auto* s : {&a.base_gloss, &a.alt_glosses.base_alt, &a.alt_glosses.shorter, &a.alt_glosses.longer}) {
        const auto n = normalize_whitespace(*s);
        if (n.empty() || upper(n) == upper(typed)) continue;
        if (std::find(candidates.begin(), candidates.end(), n) == candidates.end()) candidates.push_back(n);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](const std::string& l, const std::string& r) {
        return token_set_similarity(typed_tokens, split_whitespace(upper(l))) >
               token_set_similarity(typed_tokens, split_whitespace(upper(r)));
    });
    for (const auto& c : candidates) {
        if (out.size() == 2) break;
        add(c);
    }
    return out;
}

std::set<int> noteworthy_lines(const std::optional<std::vector<ChallengeNote>>& notes) {
    if (!notes) throw Error(ErrorCode::NotReady, "line inspection has not finished");
    std::set<int> out;
    for (const auto& n : *notes) {
        if (n.kind != ChallengeKind::none) out.insert(n.line_index);
    }
    return out;
}

} // namespace songsign
