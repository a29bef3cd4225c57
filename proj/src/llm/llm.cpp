#include "songsign/llm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "songsign/text.hpp"
#include "songsign/util.hpp"

namespace songsign {

using nlohmann::json;

// Generated from prompts/v1 at configure time.
std::vector<PromptTemplate> builtin_prompt_templates();

std::vector<std::string> placeholders(std::string_view body) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = body.find("{{", pos)) != std::string_view::npos) {
        const auto close = body.find("}}", pos + 2);
        if (close == std::string_view::npos) break;
        std::string name(body.substr(pos + 2, close - pos - 2));
        if (!name.empty() && name.find('{') == std::string::npos &&
            std::find(out.begin(), out.end(), name) == out.end()) {
            out.push_back(std::move(name));
        }
        pos = close + 2;
    }
    return out;
}

PromptTemplate PromptTemplate::from_body(std::string id, std::string body) {
    PromptTemplate t{std::move(id), std::move(body), {}};
    for (auto& name : placeholders(t.body)) t.required.insert(std::move(name));
    return t;
}

void PromptTemplate::validate() const {
    const auto present = placeholders(body);
    for (const auto& name : required) {
        if (std::find(present.begin(), present.end(), name) == present.end()) {
            throw Error(ErrorCode::InvalidArgument, "template '" + id + "' requires {{" + name + "}} but never uses it");
        }
    }
}

Rendered render(const PromptTemplate& t, const Values& values) {
    std::vector<std::string> missing;
    for (const auto& name : t.required) {
        if (!values.count(name)) missing.push_back(name);
    }
    if (!missing.empty()) {
        throw Error(ErrorCode::MissingPlaceholder, "template '" + t.id + "' is missing " + join(missing, ", "),
                    {{"template", t.id}, {"missing", missing}});
    }
    Rendered r;
    const std::string_view body = t.body;
    std::size_t pos = 0;
    while (pos < body.size()) {
        const auto open = body.find("{{", pos);
        const auto close = open == std::string_view::npos ? open : body.find("}}", open + 2);
        if (close == std::string_view::npos) {
            r.text.append(body.substr(pos));
            break;
        }
        r.text.append(body.substr(pos, open - pos));
        const std::string name(body.substr(open + 2, close - open - 2));
        if (auto it = values.find(name); it != values.end()) {
            r.text += it->second;
        } else {
            r.text.append(body.substr(open, close + 2 - open));
            r.warnings.push_back("unknown placeholder {{" + name + "}} left verbatim");
        }
        pos = close + 2;
    }
    return r;
}

void ChatExchange::validate() const {
    if (history.empty()) throw Error(ErrorCode::InvalidArgument, "chat exchange has no turns");
    for (std::size_t i = 0; i < history.size(); ++i) {
        const Role expected = i % 2 == 0 ? Role::user : Role::assistant;
        if (history[i].role != expected) {
            throw Error(ErrorCode::InvalidArgument, "chat history must alternate starting with user",
                        {{"turn", i}});
        }
    }
}

std::string prompt_digest(const std::string& template_id, const Values& values) {
    std::string data = template_id;
    for (const auto& [k, v] : values) {
        data += '\x1f';
        data += k;
        data += '=';
        data += v;
    }
    return stable_hash(data);
}

Error provider_error(std::string message, bool transient) {
    return Error(ErrorCode::ProviderError, std::move(message), {{"transient", transient}});
}

bool is_transient(const Error& e) {
    return e.code() == ErrorCode::ProviderError && e.details().value("transient", false);
}

MockProvider::MockProvider(json table) {
    for (const auto& e : table.at("entries")) {
        Entry entry;
        entry.template_id = e.at("template").get<std::string>();
        if (e.contains("digest")) entry.digest = e.at("digest").get<std::string>();
        if (e.contains("match")) entry.match = e.at("match").get<Values>();
        for (const auto& r : e.at("responses")) entry.responses.push_back(r.is_string() ? r.get<std::string>() : r.dump());
        if (entry.responses.empty()) throw Error(ErrorCode::InvalidArgument, "mock entry without responses");
        entries_.push_back(std::move(entry));
    }
}

std::shared_ptr<MockProvider> MockProvider::from_files(const std::vector<std::string>& paths) {
    json merged = {{"entries", json::array()}};
    for (const auto& p : paths) {
        auto table = json::parse(read_file(p));
        for (auto& e : table.at("entries")) merged["entries"].push_back(std::move(e));
    }
    return std::make_shared<MockProvider>(std::move(merged));
}

std::string MockProvider::complete(const ChatRequest& request) {
    const auto& x = request.exchange;
    for (const auto& e : entries_) {
        if (e.template_id != x.template_id) continue;
        if (e.digest && *e.digest != request.digest) continue;
        const bool matches = std::all_of(e.match.begin(), e.match.end(), [&](const auto& kv) {
            const auto it = x.values.find(kv.first);
            return it != x.values.end() && it->second == kv.second;
        });
        if (!matches) continue;
        const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::max(request.attempt, 0)), e.responses.size() - 1);
        return e.responses[i];
    }
    throw Error(ErrorCode::MockMiss, "no mock response for " + x.template_id + "/" + request.digest,
                {{"template", x.template_id}, {"digest", request.digest}, {"values", x.values}});
}

std::string RecordingProvider::complete(const ChatRequest& request) {
    {
        std::lock_guard lock(mu_);
        calls_.push_back({request.exchange.template_id, request.digest, request.attempt, request.exchange.values});
    }
    return inner_->complete(request);
}

std::vector<CallRecord> RecordingProvider::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::size_t RecordingProvider::count(std::string_view template_id) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(calls_.begin(), calls_.end(), [&](const CallRecord& c) { return c.template_id == template_id; }));
}

void RecordingProvider::clear() {
    std::lock_guard lock(mu_);
    calls_.clear();
}

RateLimiter::RateLimiter(double per_minute, Now now, Sleep sleep)
    : per_minute_(per_minute), tokens_(per_minute), now_(std::move(now)), sleep_(std::move(sleep)) {
    if (per_minute_ <= 0) throw Error(ErrorCode::InvalidArgument, "rate limit must be positive");
    if (!now_) now_ = [] { return std::chrono::steady_clock::now(); };
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    last_ = now_();
}

void RateLimiter::refill() {
    const auto t = now_();
    const double minutes = std::chrono::duration<double, std::ratio<60>>(t - last_).count();
    tokens_ = std::min(per_minute_, tokens_ + minutes * per_minute_);
    last_ = t;
}

bool RateLimiter::try_acquire() {
    std::lock_guard lock(mu_);
    refill();
    if (tokens_ < 1.0) return false;
    tokens_ -= 1.0;
    return true;
}

void RateLimiter::acquire() {
    while (true) {
        std::chrono::milliseconds wait{0};
        {
            std::lock_guard lock(mu_);
            refill();
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait = std::chrono::milliseconds(static_cast<long long>(std::ceil((1.0 - tokens_) * 60000.0 / per_minute_)));
        }
        sleep_(wait);
    }
}

namespace {

bool type_ok(const json& v, FieldType t) {
    switch (t) {
    case FieldType::string: return v.is_string();
    case FieldType::integer: return v.is_number_integer();
    case FieldType::number: return v.is_number();
    case FieldType::boolean: return v.is_boolean();
    case FieldType::array: return v.is_array();
    case FieldType::object: return v.is_object();
    }
    return false;
}

std::string_view type_name(FieldType t) {
    constexpr std::string_view names[] = {"string", "integer", "number", "boolean", "array", "object"};
    return names[static_cast<int>(t)];
}

} // namespace

std::optional<std::string> check_record(const json& record, const StructuredSpec& spec) {
    if (!record.is_object()) return "response is not a JSON object";
    for (const auto& f : spec.fields) {
        if (!record.contains(f.name) || record.at(f.name).is_null()) {
            if (f.required) return "missing required field '" + f.name + "'";
            continue;
        }
        const auto& v = record.at(f.name);
        if (!type_ok(v, f.type)) return "field '" + f.name + "' must be " + std::string(type_name(f.type));
        if (!f.enum_values.empty() &&
            std::find(f.enum_values.begin(), f.enum_values.end(), v.get<std::string>()) == f.enum_values.end()) {
            return "field '" + f.name + "' must be one of " + join(f.enum_values, ", ");
        }
    }
    if (spec.validator) return spec.validator(record);
    return std::nullopt;
}

std::optional<json> extract_json_object(std::string_view text) {
    const auto open = text.find('{');
    if (open == std::string_view::npos) return std::nullopt;
    // Scan to the matching close brace, respecting strings.
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}' && --depth == 0) {
            auto parsed = json::parse(text.substr(open, i - open + 1), nullptr, false);
            if (parsed.is_discarded()) return std::nullopt;
            return parsed;
        }
    }
    return std::nullopt;
}

std::vector<Turn> truncate_history(const std::vector<Turn>& history, std::size_t keep) {
    if (history.size() <= keep) return history;
    std::size_t first_kept = history.size() - keep;
    if (history[first_kept].role == Role::user) ++first_kept;
    std::ostringstream summary;
    summary << "Summary of the " << first_kept << " earlier turns in this conversation:";
    for (std::size_t i = 0; i < first_kept; ++i) {
        auto text = normalize_whitespace(history[i].text);
        if (text.size() > 120) text = text.substr(0, 117) + "...";
        summary << "\n- " << to_string(history[i].role) << ": " << text;
    }
    std::vector<Turn> out;
    out.push_back({Role::user, summary.str()});
    out.insert(out.end(), history.begin() + static_cast<std::ptrdiff_t>(first_kept), history.end());
    return out;
}

std::string LlmClient::complete(const ChatExchange& x, int attempt) {
    x.validate();
    const ChatRequest request{x, prompt_digest(x.template_id, x.values), attempt};
    for (int tries = 0;; ++tries) {
        if (limiter_) limiter_->acquire();
        try {
            return provider_->complete(request);
        } catch (const Error& e) {
            if (!is_transient(e) || tries >= 1) throw;
        }
    }
}

StructuredResult LlmClient::complete_structured(const ChatExchange& x, const StructuredSpec& spec) {
    if (spec.max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries must be >= 0");
    ChatExchange current = x;
    std::string raw;
    std::string error;
    for (int attempt = 0; attempt <= spec.max_retries; ++attempt) {
        raw = complete(current, attempt);
        const auto record = extract_json_object(raw);
        if (!record) {
            error = "response did not contain a JSON object";
        } else if (auto violation = check_record(*record, spec)) {
            error = *violation;
        } else {
            return {*record, attempt, raw};
        }
        current.history.push_back({Role::assistant, raw});
        current.history.push_back(
            {Role::user, "Your previous reply was invalid: " + error + ". Reply again with only the corrected JSON object."});
    }
    throw Error(ErrorCode::ValidationExhausted,
                "structured output for '" + x.template_id + "' failed validation: " + error,
                {{"template", x.template_id}, {"raw", raw}, {"error", error}, {"attempts", spec.max_retries + 1}});
}

const PromptCatalog& PromptCatalog::builtin() {
    static const PromptCatalog catalog(builtin_prompt_templates());
    return catalog;
}

PromptCatalog::PromptCatalog(std::vector<PromptTemplate> templates) {
    for (auto& t : templates) {
        t.validate();
        auto id = t.id;
        templates_.emplace(std::move(id), std::move(t));
    }
}

const PromptTemplate& PromptCatalog::get(std::string_view id) const {
    const auto it = templates_.find(id);
    if (it == templates_.end()) throw Error(ErrorCode::NotFound, "no prompt template '" + std::string(id) + "'");
    return it->second;
}

std::vector<std::string> PromptCatalog::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, t] : templates_) out.push_back(id);
    return out;
}

std::shared_ptr<Provider> make_provider_from_env(const std::vector<std::string>& default_tables) {
    const auto kind = env_or("ELMI_PROVIDER", "mock");
    if (kind == "mock") {
        const auto env_tables = env_or("ELMI_MOCK_TABLES", "");
        if (env_tables.empty()) return MockProvider::from_files(default_tables);
        std::vector<std::string> paths;
        std::stringstream ss(env_tables);
        for (std::string p; std::getline(ss, p, ':');) {
            if (!p.empty()) paths.push_back(p);
        }
        return MockProvider::from_files(paths);
    }
    if (kind == "http") {
        HttpProviderConfig c;
        c.base_url = env_or("ELMI_LLM_BASE_URL", c.base_url);
        c.model = env_or("ELMI_LLM_MODEL", c.model);
        c.api_key = env_or("ELMI_LLM_API_KEY", "");
        return std::make_shared<HttpProvider>(std::move(c));
    }
    throw Error(ErrorCode::InvalidArgument, "ELMI_PROVIDER must be mock or http, got '" + kind + "'");
}

} // namespace songsign
