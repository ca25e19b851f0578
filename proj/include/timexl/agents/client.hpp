#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace timexl::agents {

struct ChatMessage {
    std::string role;  // system, user, assistant
    std::string content;
};

struct ChatRequest {
    std::string templateId;
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    std::size_t maxTokens = 1024;
};

struct ChatResponse {
    std::string text;
    std::size_t inputTokens = 0;
    std::size_t outputTokens = 0;
    double seconds = 0.0;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string model() const = 0;
    // Throws ExternalServiceError on transport failure.
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

enum class CallCategory { predict, reflect, refine, probe };

std::string toString(CallCategory category);

struct UsageTotals {
    std::size_t calls = 0;
    std::size_t inputTokens = 0;
    std::size_t outputTokens = 0;
    double seconds = 0.0;

    UsageTotals& operator+=(const UsageTotals& other);
};

// Thread-safe cumulative usage per call category.
class UsageLedger {
public:
    void record(CallCategory category, const ChatResponse& response);
    UsageTotals totals(CallCategory category) const;
    UsageTotals overall() const;
    std::map<CallCategory, UsageTotals> snapshot() const;

private:
    mutable std::mutex mutex_;
    std::map<CallCategory, UsageTotals> totals_;
};

// Usage accumulated between two snapshots.
std::map<CallCategory, UsageTotals> usageDelta(const std::map<CallCategory, UsageTotals>& before,
                                               const std::map<CallCategory, UsageTotals>& after);
nlohmann::ordered_json toJson(const std::map<CallCategory, UsageTotals>& usage, bool withSeconds);

struct TranscriptEntry {
    CallCategory category = CallCategory::predict;
    std::string templateId;
    std::vector<ChatMessage> messages;
    ChatResponse response;
    std::size_t attempts = 1;
};

nlohmann::ordered_json toJson(const TranscriptEntry& entry);

// Append-only JSONL log of every call. Without a file it only buffers.
class Transcript {
public:
    Transcript() = default;
    explicit Transcript(const std::filesystem::path& file);

    void append(const TranscriptEntry& entry);
    void appendAll(const std::vector<TranscriptEntry>& entries);
    std::vector<TranscriptEntry> entries() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<TranscriptEntry> entries_;
    std::unique_ptr<std::ofstream> out_;
};

}  // namespace timexl::agents
