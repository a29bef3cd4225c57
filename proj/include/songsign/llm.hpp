#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "songsign/error.hpp"
#include "songsign/model.hpp"

namespace songsign {

using Values = std::map<std::string, std::string>;

struct PromptTemplate {
    std::string id;
    std::string body;
    std::set<std::string> required;

    // Required set = every placeholder in the body.
    static PromptTemplate from_body(std::string id, std::string body);
    // Throws InvalidArgument when a required name never appears in the body.
    void validate() const;
};

// Names inside `{{...}}` in order of first appearance. Names may contain spaces.
std::vector<std::string> placeholders(std::string_view body);

struct Rendered {
    std::string text;
    std::vector<std::string> warnings;
};

// Throws MissingPlaceholder (details.missing) when a required value is absent.
// Placeholders with no value and not required stay verbatim, with a warning.
Rendered render(const PromptTemplate& t, const Values& values);

enum class Temperature { deterministic, creative };

struct Turn {
    Role role = Role::user;
    std::string text;

    bool operator==(const Turn&) const = default;
};

struct ChatExchange {
    std::string system;
    std::vector<Turn> history;
    Temperature temperature = Temperature::deterministic;
    // Identify the prompt for mock lookup and logging; not sent on the wire.
    std::string template_id;
    Values values;

    // Throws InvalidArgument unless history is non-empty and alternates
    // user/assistant starting with user.
    void validate() const;
};

// stable_hash over the template id and the sorted name=value pairs.
std::string prompt_digest(const std::string& template_id, const Values& values);

struct ChatRequest {
    const ChatExchange& exchange;
    std::string digest;
    int attempt = 0; // 0 for the first call, +1 per validation re-prompt
};

// Errors: ProviderError with details.transient = true|false.
class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

Error provider_error(std::string message, bool transient);
bool is_transient(const Error& e);

// Table-driven provider. Table JSON:
//   {"entries": [{"template": id, "digest"?: hex, "match"?: {name: value},
//                 "responses": [text | object, ...]}]}
// The first entry whose template matches and whose digest (or every match
// pair) agrees with the request is used; an entry with neither matches any
// request for its template. Response i answers attempt i (the last one
// repeats). Objects are returned as compact JSON. A miss throws MockMiss.
class MockProvider : public Provider {
public:
    explicit MockProvider(nlohmann::json table);
    static std::shared_ptr<MockProvider> from_files(const std::vector<std::string>& paths);

    std::string complete(const ChatRequest& request) override;

private:
    struct Entry {
        std::string template_id;
        std::optional<std::string> digest;
        Values match;
        std::vector<std::string> responses;
    };
    std::vector<Entry> entries_;
};

struct CallRecord {
    std::string template_id;
    std::string digest;
    int attempt = 0;
    Values values;
};

// Forwards to an inner provider and logs each call in order.
class RecordingProvider : public Provider {
public:
    explicit RecordingProvider(std::shared_ptr<Provider> inner) : inner_(std::move(inner)) {}
    std::string complete(const ChatRequest& request) override;

    std::vector<CallRecord> calls() const;
    std::size_t count(std::string_view template_id) const;
    void clear();

private:
    std::shared_ptr<Provider> inner_;
    mutable std::mutex mu_;
    std::vector<CallRecord> calls_;
};

struct HttpProviderConfig {
    std::string base_url = "https://api.openai.com"; // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string api_key;
    double creative_temperature = 0.8;
    std::chrono::seconds timeout{60};
};

// OpenAI-compatible chat-completions client (wire format in docs/llm-wire.md).
class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {}
    std::string complete(const ChatRequest& request) override;

    static nlohmann::json request_body(const HttpProviderConfig& config, const ChatExchange& x);

private:
    HttpProviderConfig config_;
};

// Token bucket: `per_minute` tokens, refilled continuously, burst = per_minute.
class RateLimiter {
public:
    using Now = std::function<std::chrono::steady_clock::time_point()>;
    using Sleep = std::function<void(std::chrono::milliseconds)>;

    RateLimiter(double per_minute, Now now = {}, Sleep sleep = {});
    // Blocks until a token is available and takes it.
    void acquire();
    bool try_acquire();

private:
    void refill();

    double per_minute_;
    double tokens_;
    Now now_;
    Sleep sleep_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

enum class FieldType { string, integer, number, boolean, array, object };

struct FieldSpec {
    std::string name;
    FieldType type = FieldType::string;
    bool required = true;
    std::vector<std::string> enum_values; // strings only; empty = any
};

struct StructuredSpec {
    std::vector<FieldSpec> fields;
    int max_retries = 2;
    // Extra semantic check; returns an error message or nullopt.
    std::function<std::optional<std::string>(const nlohmann::json&)> validator;
};

// nullopt when `record` satisfies the spec, else the first violation.
std::optional<std::string> check_record(const nlohmann::json& record, const StructuredSpec& spec);

// Parses the first JSON object in `text` (code fences tolerated).
std::optional<nlohmann::json> extract_json_object(std::string_view text);

struct StructuredResult {
    nlohmann::json record;
    int retries_used = 0;
    std::string raw;
};

constexpr std::size_t kHistoryTurns = 20;

// Keeps the most recent kHistoryTurns turns; anything older is folded into
// one synthetic user turn. When the kept window would start with a user turn
// that turn is folded too, so the result still alternates from user.
std::vector<Turn> truncate_history(const std::vector<Turn>& history, std::size_t keep = kHistoryTurns);

class LlmClient {
public:
    explicit LlmClient(std::shared_ptr<Provider> provider, std::shared_ptr<RateLimiter> limiter = nullptr)
        : provider_(std::move(provider)), limiter_(std::move(limiter)) {}

    // One retry on a transient ProviderError; the second failure propagates.
    std::string complete(const ChatExchange& x, int attempt = 0);

    // Re-prompts with the validation error up to spec.max_retries times, then
    // throws ValidationExhausted (details.raw, details.error, details.attempts).
    StructuredResult complete_structured(const ChatExchange& x, const StructuredSpec& spec);

    Provider& provider() { return *provider_; }

private:
    std::shared_ptr<Provider> provider_;
    std::shared_ptr<RateLimiter> limiter_;
};

// Built-in prompt templates, compiled in from prompts/v1.
class PromptCatalog {
public:
    static const PromptCatalog& builtin();
    explicit PromptCatalog(std::vector<PromptTemplate> templates);

    // Throws NotFound.
    const PromptTemplate& get(std::string_view id) const;
    std::vector<std::string> ids() const;

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

// ELMI_PROVIDER=mock|http. Mock tables come from ELMI_MOCK_TABLES
// (colon-separated paths) or `default_tables`.
std::shared_ptr<Provider> make_provider_from_env(const std::vector<std::string>& default_tables);

} // namespace songsign
