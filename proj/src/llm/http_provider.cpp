#include <httplib.h>

#include "songsign/llm.hpp"

namespace songsign {

using nlohmann::json;

json HttpProvider::request_body(const HttpProviderConfig& config, const ChatExchange& x) {
    json messages = json::array();
    if (!x.system.empty()) messages.push_back({{"role", "system"}, {"content", x.system}});
    for (const auto& turn : x.history) messages.push_back({{"role", to_string(turn.role)}, {"content", turn.text}});
    return {{"model", config.model},
            {"messages", std::move(messages)},
            {"temperature", x.temperature == Temperature::deterministic ? 0.0 : config.creative_temperature}};
}

std::string HttpProvider::complete(const ChatRequest& request) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const auto body = request_body(config_, request.exchange).dump();
    const auto res = client.Post(config_.path, headers, body, "application/json");
    if (!res) throw provider_error("LLM request failed: " + httplib::to_string(res.error()), true);
    if (res->status == 429 || res->status >= 500) {
        throw provider_error("LLM provider returned HTTP " + std::to_string(res->status), true);
    }
    if (res->status != 200) {
        throw provider_error("LLM provider returned HTTP " + std::to_string(res->status) + ": " + res->body, false);
    }
    const auto parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw provider_error("LLM response is not JSON", false);
    try {
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw provider_error("LLM response has no choices[0].message.content", false);
    }
}

} // namespace songsign
