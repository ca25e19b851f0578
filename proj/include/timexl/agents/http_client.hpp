#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "timexl/agents/client.hpp"

namespace timexl::agents {

struct HttpClientOptions {
    std::string endpoint;  // full URL of the chat-completions resource
    std::string model;
    std::string apiKey;    // sent as a bearer token when non-empty
    std::chrono::seconds connectTimeout{10};
    std::chrono::seconds readTimeout{120};
};

// Reads TIMEXL_LLM_ENDPOINT, TIMEXL_LLM_MODEL and TIMEXL_LLM_API_KEY.
// Throws InvalidConfigError when the endpoint or model is unset.
HttpClientOptions httpOptionsFromEnvironment();

// Chat-completion client: POSTs {"model", "messages", "temperature",
// "max_tokens"} and reads choices[0].message.content plus the usage block.
// Connection failures, 429 and 5xx raise a retryable ExternalServiceError;
// other non-2xx statuses raise a non-retryable one.
class HttpLlmClient final : public LlmClient {
public:
    explicit HttpLlmClient(HttpClientOptions options);
    ~HttpLlmClient() override;

    std::string model() const override { return options_.model; }
    ChatResponse complete(const ChatRequest& request) override;

private:
    HttpClientOptions options_;
    std::string base_;
    std::string path_;
};

}  // namespace timexl::agents
