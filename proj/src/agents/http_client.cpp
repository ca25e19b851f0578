#include "timexl/agents/http_client.hpp"

#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "timexl/agents/prompts.hpp"
#include "timexl/error.hpp"

namespace timexl::agents {

namespace {

std::string env(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

}  // namespace

HttpClientOptions httpOptionsFromEnvironment() {
    HttpClientOptions o;
    o.endpoint = env("TIMEXL_LLM_ENDPOINT");
    o.model = env("TIMEXL_LLM_MODEL");
    o.apiKey = env("TIMEXL_LLM_API_KEY");
    if (o.endpoint.empty()) throw InvalidConfigError("TIMEXL_LLM_ENDPOINT is not set");
    if (o.model.empty()) throw InvalidConfigError("TIMEXL_LLM_MODEL is not set");
    return o;
}

HttpLlmClient::HttpLlmClient(HttpClientOptions options) : options_(std::move(options)) {
    const auto scheme = options_.endpoint.find("://");
    if (scheme == std::string::npos) {
        throw InvalidConfigError("LLM endpoint '" + options_.endpoint + "' is not an http(s) URL");
    }
    const std::string proto = options_.endpoint.substr(0, scheme);
    if (proto != "http" && proto != "https") {
        throw InvalidConfigError("LLM endpoint '" + options_.endpoint + "' is not an http(s) URL");
    }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (proto == "https") throw InvalidConfigError("this build has no TLS support for " + options_.endpoint);
#endif
    const auto slash = options_.endpoint.find('/', scheme + 3);
    base_ = options_.endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : options_.endpoint.substr(slash);
}

HttpLlmClient::~HttpLlmClient() = default;

ChatResponse HttpLlmClient::complete(const ChatRequest& request) {
    nlohmann::json body;
    body["model"] = options_.model;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.maxTokens;

    httplib::Client cli(base_);
    cli.set_connection_timeout(options_.connectTimeout);
    cli.set_read_timeout(options_.readTimeout);
    httplib::Headers headers;
    if (!options_.apiKey.empty()) headers.emplace("Authorization", "Bearer " + options_.apiKey);

    const auto start = std::chrono::steady_clock::now();
    const auto res = cli.Post(path_, headers, body.dump(), "application/json");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!res) {
        throw ExternalServiceError("LLM endpoint " + options_.endpoint + " unreachable: " + httplib::to_string(res.error()),
                                   true);
    }
    if (res->status < 200 || res->status >= 300) {
        const bool retryable = res->status == 429 || res->status >= 500;
        throw ExternalServiceError("LLM endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                       res->body.substr(0, 200),
                                   retryable);
    }
    ChatResponse out;
    out.seconds = seconds;
    try {
        const auto doc = nlohmann::json::parse(res->body);
        out.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        if (doc.contains("usage") && doc["usage"].is_object()) {
            out.inputTokens = doc["usage"].value("prompt_tokens", std::size_t{0});
            out.outputTokens = doc["usage"].value("completion_tokens", std::size_t{0});
        } else {
            for (const auto& m : request.messages) out.inputTokens += countTokens(m.content);
            out.outputTokens = countTokens(out.text);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ExternalServiceError(std::string("LLM endpoint sent a malformed completion: ") + e.what(), true);
    }
    return out;
}

}  // namespace timexl::agents
