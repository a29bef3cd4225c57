#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "songsign/error.hpp"
#include "songsign/llm.hpp"
#include "songsign/model.hpp"

namespace songsign {

// Everything a prompt may draw on for one line.
struct LineContext {
    SongProject project;
    LyricLine line;
    std::optional<LineAnnotation> annotation; // absent until preprocessing is ready
    std::optional<std::string> user_gloss;    // latest saved gloss, if any
};

// Storage the engine needs. The service backs it with the store; tests use
// MemoryChatBackend. Implementations must be thread-safe.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    // Throws NotFound for an unknown project or line.
    virtual LineContext line_context(const std::string& project_id, int line_index) = 0;
    virtual std::optional<ChatThread> find_thread(const std::string& thread_id) = 0;
    // Throws ThreadExists when the id is taken.
    virtual void create_thread(const ChatThread& thread) = 0;
    // Appends with seq = current size + 1 and returns the stored message.
    virtual ChatMessage append_message(const std::string& thread_id, ChatMessage message) = 0;
};

class MemoryChatBackend : public ChatBackend {
public:
    void put_context(LineContext ctx);
    void set_user_gloss(const std::string& project_id, int line_index, std::optional<std::string> gloss);

    LineContext line_context(const std::string& project_id, int line_index) override;
    std::optional<ChatThread> find_thread(const std::string& thread_id) override;
    void create_thread(const ChatThread& thread) override;
    ChatMessage append_message(const std::string& thread_id, ChatMessage message) override;

private:
    std::mutex mu_;
    std::map<std::pair<std::string, int>, LineContext> contexts_;
    std::map<std::string, ChatThread> threads_;
};

// "<project>-L<line>"; one thread per line.
std::string thread_id_for(const std::string& project_id, int line_index);

// Template chosen for an intent, refined when the user has a gloss.
std::string_view template_for(Intent intent, bool has_user_gloss);

// First of Meaning/Glossing/Emoting/Timing named in `reply`, case-insensitive
// and as a whole word.
std::optional<Intent> parse_intent(std::string_view reply);

// Sentence split on '.', '!', '?' and newlines; terminators stay attached.
std::vector<std::string> split_sentences(std::string_view text);

std::size_t count_questions(std::string_view text);
bool has_digit(std::string_view text);

// Keeps the first two question sentences and every other sentence.
std::string limit_questions(std::string_view text, std::size_t max_questions = 2);
// Drops sentences containing a digit.
std::string drop_digit_sentences(std::string_view text);

// Relative pace of a line (no digits): compares the line span with the
// number of tokens in the base gloss.
std::string describe_pace(const LyricLine& line, std::size_t gloss_tokens);

struct IntentDecision {
    Intent intent = Intent::Meaning;
    bool fallback = false; // classifier failed or answered off-list
};

struct UserInput {
    std::string text;
    std::optional<Intent> shortcut; // set for the four shortcut buttons
};

struct TurnResult {
    ChatMessage user;
    ChatMessage assistant;
    std::string template_id;
    int regenerations = 0;
};

class ChatEngine {
public:
    ChatEngine(std::shared_ptr<LlmClient> llm, std::shared_ptr<ChatBackend> backend)
        : llm_(std::move(llm)), backend_(std::move(backend)) {}

    // Exactly one provider call; any failure falls back to Meaning.
    IntentDecision classify_intent(const std::string& message, const LyricLine& line);

    // Throws ThreadExists, NotNoteworthy (proactive on a line without a
    // challenge) and NotReady (proactive before inspection finished).
    ChatThread open_thread(const std::string& project_id, int line_index, bool proactive);

    // Existing thread for the line, or NotFound.
    ChatThread get_thread(const std::string& thread_id);

    // Serialized per thread: a concurrent call on the same thread throws Busy.
    // Both messages are persisted before returning. Provider failure yields a
    // flagged apology instead of an exception.
    TurnResult handle_turn(const std::string& thread_id, const UserInput& input);

private:
    std::string reply_with_persona(const ChatExchange& x, Intent intent, int& regenerations);

    std::shared_ptr<LlmClient> llm_;
    std::shared_ptr<ChatBackend> backend_;
    std::mutex busy_mu_;
    std::set<std::string> busy_;
};

extern const char* const kApologyText;

// One or two suggestions for the gloss being typed. Throws NotReady when the
// line has no annotation.
std::vector<std::string> suggest_inline(const std::optional<LineAnnotation>& annotation, std::string_view partial);

// Lines whose challenge kind is not none; NotReady without inspection output.
std::set<int> noteworthy_lines(const std::optional<std::vector<ChallengeNote>>& notes);

} // namespace songsign
