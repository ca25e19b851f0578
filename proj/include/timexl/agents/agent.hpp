#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "timexl/agents/client.hpp"
#include "timexl/agents/prompts.hpp"
#include "timexl/data/segmentation.hpp"

namespace timexl::agents {

struct AgentOptions {
    std::string task = "Classify the record into one of the labels.";
    std::vector<std::string> labels;
    double predictTemperature = 0.3;
    double generateTemperature = 0.7;
    std::size_t maxTokens = 1024;
    std::size_t formatRetries = 1;
    std::size_t transportRetries = 3;
    double backoffSeconds = 0.5;  // doubles after every failed attempt
    std::size_t reflectionBatch = 50;
    std::size_t contextBudget = 3000;  // words of report text per prompt
    std::size_t parallelism = 1;
};

nlohmann::ordered_json toJson(const AgentOptions& options);
AgentOptions agentOptionsFromJson(const nlohmann::json& doc, AgentOptions defaults = {});

struct AgentContext {
    LlmClient* client = nullptr;
    UsageLedger* ledger = nullptr;
    Transcript* transcript = nullptr;  // optional
    AgentOptions options;
};

// One logical call: transport failures are retried with exponential backoff,
// every successful attempt is recorded in the ledger and transcript.
ChatResponse callModel(AgentContext& ctx, CallCategory category, TemplateId templateId,
                       const std::vector<ChatMessage>& messages, double temperature);

// Drops leading segments until the joined text fits the word budget. At
// least the last segment is kept.
std::vector<std::string> fitToBudget(const std::vector<std::string>& segments, std::size_t budget,
                                     std::size_t* dropped = nullptr);

enum class ParseStatus { ok, failed };

struct LabelPrediction {
    std::optional<std::size_t> label;
    ParseStatus status = ParseStatus::failed;
    std::string raw;
    std::size_t calls = 0;
};

// Empty `explanations` selects the text-only prompt.
LabelPrediction predictWithLLM(AgentContext& ctx, const std::vector<std::string>& segments,
                               const std::vector<ExplanationLine>& explanations,
                               CallCategory category = CallCategory::predict);

struct ValuePrediction {
    std::optional<double> value;
    ParseStatus status = ParseStatus::failed;
    std::string raw;
};

ValuePrediction predictValueWithLLM(AgentContext& ctx, const std::vector<std::string>& segments,
                                    const std::vector<ExplanationLine>& explanations);

struct ReflectionRecord {
    std::size_t truth = 0;
    std::optional<std::size_t> predicted;  // nullopt when the model gave no usable label
    std::vector<std::string> segments;
};

struct ReflectionState {
    std::map<std::size_t, std::string> perClass;
    std::string summary;
    std::size_t iteration = 0;
    std::size_t steps = 0;  // generate plus update calls so far
};

nlohmann::ordered_json toJson(const ReflectionState& state);
ReflectionState reflectionStateFromJson(const nlohmann::json& doc);

// Sections start with "## <label>" lines. Text outside any section, or a
// reply without sections, is assigned to every class in `fallbackClasses`.
std::map<std::size_t, std::string> parseReflectionSections(const std::string& response,
                                                           const std::vector<std::string>& labels,
                                                           const std::vector<std::size_t>& fallbackClasses);
std::string formatReflectionSections(const std::map<std::size_t, std::string>& perClass,
                                     const std::vector<std::string>& labels);

std::map<std::size_t, std::string> generateReflection(AgentContext& ctx, const std::vector<ReflectionRecord>& batch);

// Skipped when the batch is empty.
void updateReflection(AgentContext& ctx, ReflectionState& state, const std::vector<ReflectionRecord>& batch);

std::string summarizeReflections(AgentContext& ctx, ReflectionState& state);

// Generate on the first batch, update on every later one, then summarize.
ReflectionState reflect(AgentContext& ctx, const std::vector<ReflectionRecord>& records, std::size_t iteration);

struct Refinement {
    std::vector<std::string> segments;
    bool fellBack = false;
    std::string warning;
};

// Rewrites the report under `guideline`, re-segmenting the reply with
// `policy`. Falls back to the input when fewer than `minSegments` remain.
Refinement refineText(AgentContext& ctx, const std::string& guideline, const std::vector<std::string>& segments,
                      const data::SegmentationPolicy& policy, std::size_t minSegments);

// Runs f(ctx, i) for i in [0, n) on up to options.parallelism threads. Each
// item's transcript entries are buffered and appended in index order, so the
// transcript does not depend on scheduling.
template <typename F>
void forEachParallel(AgentContext& ctx, std::size_t n, F&& f) {
    if (ctx.options.parallelism <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(ctx, i);
        return;
    }
    std::vector<std::unique_ptr<Transcript>> buffers(n);
    for (auto& b : buffers) b = std::make_unique<Transcript>();
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failureMutex;
    const auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            {
                std::lock_guard lock(failureMutex);
                if (failure) return;
            }
            AgentContext local = ctx;
            local.transcript = buffers[i].get();
            try {
                f(local, i);
            } catch (...) {
                std::lock_guard lock(failureMutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < std::min(ctx.options.parallelism, n); ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (ctx.transcript) {
        for (const auto& b : buffers) ctx.transcript->appendAll(b->entries());
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace timexl::agents
