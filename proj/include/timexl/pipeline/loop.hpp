#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "timexl/agents/agent.hpp"
#include "timexl/data/dataset.hpp"
#include "timexl/data/embedding.hpp"
#include "timexl/encoder/config.hpp"
#include "timexl/encoder/model.hpp"
#include "timexl/eval/metrics.hpp"
#include "timexl/eval/report.hpp"
#include "timexl/pipeline/fusion.hpp"

namespace timexl::pipeline {

struct EarlyStop {
    bool enabled = true;
    double epsilon = 0.002;  // absolute fused F1
    std::size_t patience = 1;
};

struct LoopConfig {
    encoder::EncoderConfig encoder;
    agents::AgentOptions agents;
    std::size_t iterations = 3;  // tau
    std::size_t omega = 3;
    encoder::Modality explanationModality = encoder::Modality::text;
    EarlyStop earlyStop;
    bool selectiveRefinement = false;
    bool textQualityProbe = true;
    std::uint64_t seed = 7;

    void validate() const;
};

nlohmann::ordered_json toJson(const LoopConfig& config);
LoopConfig loopConfigFromJson(const nlohmann::json& doc);

struct ScorePair {
    double macroF1 = 0.0;
    double auc = 0.0;
};

struct IterationReport {
    std::size_t iteration = 0;
    ScorePair encoder;
    ScorePair llm;
    ScorePair fused;
    double alpha = 1.0;
    double textQuality = 0.0;
    bool improved = false;
    double bestFusedF1 = 0.0;
    std::size_t encoderBestEpoch = 0;
    std::size_t llmFailures = 0;
    std::size_t refinementFallbacks = 0;
    std::size_t refinementSkipped = 0;
    std::map<agents::CallCategory, agents::UsageTotals> usage;
};

nlohmann::ordered_json toJson(const IterationReport& report);
IterationReport iterationReportFromJson(const nlohmann::json& doc);
eval::IterationRow toRow(const IterationReport& report);

struct BestState {
    encoder::EncoderModel model;
    agents::ReflectionState reflection;
    double alpha = 1.0;
    double fusedF1 = -1.0;
    double fusedAuc = 0.0;
    std::size_t iteration = 0;
};

struct LoopState {
    std::size_t iteration = 0;
    std::vector<data::MultiModalSample> samples;  // current texts s_i, embedded
    std::optional<BestState> best;
    std::vector<IterationReport> history;
    std::size_t stale = 0;              // consecutive iterations below the early-stop threshold
    std::vector<std::string> correct;   // sorted ids predicted correctly last iteration
    bool stopped = false;
};

// Assigns splits (unless already assigned), fits and applies train-split
// normalization when the manifest has none, and embeds every text.
data::Dataset prepareDataset(data::Dataset dataset, std::uint64_t seed, data::EmbeddingProvider& embedder,
                             data::EmbeddingCache& cache);

struct LoopContext {
    agents::AgentContext agents;
    data::DatasetManifest manifest;
    data::EmbeddingProvider* embedder = nullptr;
    data::EmbeddingCache* cache = nullptr;
};

LoopState initialState(const data::Dataset& prepared);

// One pass of the loop on a copy of `state`; the input is untouched if an
// agent call fails.
LoopState runIteration(const LoopState& state, LoopContext& ctx, const LoopConfig& config);

// Iterates until tau iterations ran or early stopping triggers. `onIteration`
// sees each committed state.
LoopState runLoop(const data::Dataset& prepared, LoopContext& ctx, const LoopConfig& config,
                  const std::function<void(const LoopState&)>& onIteration = {});

struct TestRecord {
    std::string id;
    std::size_t truth = 0;
    std::vector<double> encoder;
    std::optional<std::size_t> llm;
    std::vector<double> fused;
    std::size_t fusedLabel = 0;
    std::vector<std::string> segments;  // refined text
    std::vector<std::string> explanations;
};

nlohmann::ordered_json toJson(const TestRecord& record, const std::vector<std::string>& labels);

struct TestResult {
    std::vector<TestRecord> records;
    eval::MetricsReport encoder;
    eval::MetricsReport llm;
    eval::MetricsReport fused;
    double alpha = 1.0;
};

// Refines the test texts with the best reflection, then predicts with the
// best encoder, the LLM and the validation-selected alpha. Throws
// ContractError without a best state.
TestResult testPhase(const std::optional<BestState>& best, std::vector<data::MultiModalSample> test, LoopContext& ctx,
                     const LoopConfig& config);

std::vector<agents::ExplanationLine> explanationLines(const encoder::Explanation& explanation,
                                                      const std::vector<std::string>& labels);

}  // namespace timexl::pipeline
