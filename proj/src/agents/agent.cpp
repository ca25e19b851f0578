#include "timexl/agents/agent.hpp"

#include <chrono>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "timexl/error.hpp"

namespace timexl::agents {

namespace {

std::string joinLabels(const std::vector<std::string>& labels) {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) out += (i ? ", " : "") + labels[i];
    return out;
}

std::string joinLines(const std::vector<std::string>& segments) {
    std::string out;
    for (std::size_t i = 0; i < segments.size(); ++i) out += (i ? "\n" : "") + segments[i];
    return out;
}

std::string oneLine(const std::vector<std::string>& segments) {
    std::string out;
    for (std::size_t i = 0; i < segments.size(); ++i) out += (i ? " " : "") + segments[i];
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

const std::string& labelName(const AgentContext& ctx, std::size_t index) {
    if (index >= ctx.options.labels.size()) {
        throw ContractError("label index " + std::to_string(index) + " outside the label set");
    }
    return ctx.options.labels[index];
}

std::string reportText(const AgentContext& ctx, const std::vector<std::string>& segments) {
    std::size_t dropped = 0;
    const auto kept = fitToBudget(segments, ctx.options.contextBudget, &dropped);
    if (dropped) spdlog::info("prompt budget: dropped {} leading segment(s)", dropped);
    return joinLines(kept);
}

std::pair<std::string, std::string> recordSections(const AgentContext& ctx, const std::vector<ReflectionRecord>& batch) {
    std::string correct, incorrect;
    for (const auto& r : batch) {
        const std::string predicted = r.predicted ? labelName(ctx, *r.predicted) : std::string("(no answer)");
        const std::string line = "- true: " + labelName(ctx, r.truth) + "; predicted: " + predicted +
                                 "; report: " + oneLine(r.segments);
        std::string& target = r.predicted == r.truth ? correct : incorrect;
        if (!target.empty()) target += '\n';
        target += line;
    }
    return {correct, incorrect};
}

std::vector<std::size_t> classesIn(const std::vector<ReflectionRecord>& batch) {
    std::vector<std::size_t> out;
    for (const auto& r : batch) {
        if (std::find(out.begin(), out.end(), r.truth) == out.end()) out.push_back(r.truth);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void requireLabels(const AgentContext& ctx) {
    if (ctx.options.labels.empty()) throw ContractError("agent: the label set is empty");
    if (!ctx.client || !ctx.ledger) throw ContractError("agent: context has no client or ledger");
}

}  // namespace

nlohmann::ordered_json toJson(const AgentOptions& o) {
    nlohmann::ordered_json doc;
    doc["task"] = o.task;
    doc["labels"] = o.labels;
    doc["predict_temperature"] = o.predictTemperature;
    doc["generate_temperature"] = o.generateTemperature;
    doc["max_tokens"] = o.maxTokens;
    doc["format_retries"] = o.formatRetries;
    doc["transport_retries"] = o.transportRetries;
    doc["backoff_seconds"] = o.backoffSeconds;
    doc["reflection_batch"] = o.reflectionBatch;
    doc["context_budget"] = o.contextBudget;
    doc["parallelism"] = o.parallelism;
    return doc;
}

AgentOptions agentOptionsFromJson(const nlohmann::json& doc, AgentOptions o) {
    static const std::vector<std::string> known = {"task", "labels", "predict_temperature", "generate_temperature",
                                                   "max_tokens", "format_retries", "transport_retries",
                                                   "backoff_seconds", "reflection_batch", "context_budget",
                                                   "parallelism"};
    if (!doc.is_object()) throw InvalidConfigError("agent options must be an object");
    for (const auto& [key, _] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InvalidConfigError("unknown agent option '" + key + "'");
        }
    }
    try {
        o.task = doc.value("task", o.task);
        o.labels = doc.value("labels", o.labels);
        o.predictTemperature = doc.value("predict_temperature", o.predictTemperature);
        o.generateTemperature = doc.value("generate_temperature", o.generateTemperature);
        o.maxTokens = doc.value("max_tokens", o.maxTokens);
        o.formatRetries = doc.value("format_retries", o.formatRetries);
        o.transportRetries = doc.value("transport_retries", o.transportRetries);
        o.backoffSeconds = doc.value("backoff_seconds", o.backoffSeconds);
        o.reflectionBatch = doc.value("reflection_batch", o.reflectionBatch);
        o.contextBudget = doc.value("context_budget", o.contextBudget);
        o.parallelism = doc.value("parallelism", o.parallelism);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfigError(std::string("agent options: ") + e.what());
    }
    if (o.reflectionBatch == 0) throw InvalidConfigError("reflection_batch must be >= 1");
    if (o.parallelism == 0) throw InvalidConfigError("parallelism must be >= 1");
    if (o.backoffSeconds < 0.0) throw InvalidConfigError("backoff_seconds must be >= 0");
    for (double t : {o.predictTemperature, o.generateTemperature}) {
        if (t < 0.0 || t > 2.0) throw InvalidConfigError("temperatures must lie in [0, 2]");
    }
    return o;
}

ChatResponse callModel(AgentContext& ctx, CallCategory category, TemplateId templateId,
                       const std::vector<ChatMessage>& messages, double temperature) {
    if (!ctx.client || !ctx.ledger) throw ContractError("agent: context has no client or ledger");
    ChatRequest request{toString(templateId), messages, temperature, ctx.options.maxTokens};
    double wait = ctx.options.backoffSeconds;
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            ChatResponse r = ctx.client->complete(request);
            ctx.ledger->record(category, r);
            if (ctx.transcript) ctx.transcript->append({category, request.templateId, messages, r, attempt + 1});
            return r;
        } catch (const ExternalServiceError& e) {
            if (!e.retryable()) throw;
            if (attempt >= ctx.options.transportRetries) {
                throw ExternalServiceError(request.templateId + " call failed after " + std::to_string(attempt + 1) +
                                               " attempts: " + e.what(),
                                           false);
            }
            spdlog::warn("{} call failed ({}), retrying in {:.2f}s", request.templateId, e.what(), wait);
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
            wait *= 2.0;
        }
    }
}

std::vector<std::string> fitToBudget(const std::vector<std::string>& segments, std::size_t budget,
                                     std::size_t* dropped) {
    std::size_t total = 0;
    for (const auto& s : segments) total += countTokens(s);
    std::size_t first = 0;
    while (total > budget && first + 1 < segments.size()) total -= countTokens(segments[first++]);
    if (dropped) *dropped = first;
    return {segments.begin() + static_cast<std::ptrdiff_t>(first), segments.end()};
}

LabelPrediction predictWithLLM(AgentContext& ctx, const std::vector<std::string>& segments,
                               const std::vector<ExplanationLine>& explanations, CallCategory category) {
    requireLabels(ctx);
    const PromptFields fields = {{"task", ctx.options.task},
                                 {"labels", joinLabels(ctx.options.labels)},
                                 {"explanations", formatExplanations(explanations)},
                                 {"text", reportText(ctx, segments)}};
    const TemplateId id = explanations.empty() ? TemplateId::predictionTextOnly : TemplateId::prediction;
    auto messages = renderPrompt(id, fields);
    LabelPrediction out;
    for (std::size_t attempt = 0; attempt <= ctx.options.formatRetries; ++attempt) {
        const auto r = callModel(ctx, category, id, messages, ctx.options.predictTemperature);
        ++out.calls;
        out.raw = r.text;
        out.label = parseLabel(r.text, ctx.options.labels);
        if (out.label) {
            out.status = ParseStatus::ok;
            return out;
        }
        messages.push_back({"assistant", r.text});
        messages.push_back({"user", "Your reply did not end with a line \"ANSWER: <label>\" naming one of: " +
                                        joinLabels(ctx.options.labels) + ". Answer again and finish with that line."});
    }
    spdlog::debug("prediction unparseable after {} call(s)", out.calls);
    return out;
}

ValuePrediction predictValueWithLLM(AgentContext& ctx, const std::vector<std::string>& segments,
                                    const std::vector<ExplanationLine>& explanations) {
    const PromptFields fields = {{"task", ctx.options.task},
                                 {"explanations", formatExplanations(explanations)},
                                 {"text", reportText(ctx, segments)}};
    auto messages = renderPrompt(TemplateId::regressionPrediction, fields);
    ValuePrediction out;
    for (std::size_t attempt = 0; attempt <= ctx.options.formatRetries; ++attempt) {
        const auto r = callModel(ctx, CallCategory::predict, TemplateId::regressionPrediction, messages,
                                 ctx.options.predictTemperature);
        out.raw = r.text;
        out.value = parseValue(r.text);
        if (out.value) {
            out.status = ParseStatus::ok;
            return out;
        }
        messages.push_back({"assistant", r.text});
        messages.push_back({"user", "Your reply did not end with a line \"ANSWER: <number>\". Answer again and "
                                    "finish with that line."});
    }
    return out;
}

nlohmann::ordered_json toJson(const ReflectionState& s) {
    nlohmann::ordered_json doc;
    doc["iteration"] = s.iteration;
    doc["steps"] = s.steps;
    doc["per_class"] = nlohmann::ordered_json::object();
    for (const auto& [c, text] : s.perClass) doc["per_class"][std::to_string(c)] = text;
    doc["summary"] = s.summary;
    return doc;
}

ReflectionState reflectionStateFromJson(const nlohmann::json& doc) {
    ReflectionState s;
    try {
        s.iteration = doc.at("iteration").get<std::size_t>();
        s.steps = doc.at("steps").get<std::size_t>();
        for (const auto& [key, text] : doc.at("per_class").items()) s.perClass[std::stoul(key)] = text.get<std::string>();
        s.summary = doc.at("summary").get<std::string>();
    } catch (const std::exception& e) {
        throw SchemaError(std::string("reflection state: ") + e.what());
    }
    return s;
}

std::map<std::size_t, std::string> parseReflectionSections(const std::string& response,
                                                           const std::vector<std::string>& labels,
                                                           const std::vector<std::size_t>& fallbackClasses) {
    std::map<std::size_t, std::string> out;
    std::optional<std::size_t> current;
    std::string loose;
    std::istringstream in(response);
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("## ", 0) == 0) {
            const std::string name = normalizeLabel(line.substr(3));
            current.reset();
            for (std::size_t c = 0; c < labels.size(); ++c) {
                if (normalizeLabel(labels[c]) == name) current = c;
            }
            if (current) {
                out[*current];
                continue;
            }
        }
        std::string& target = current ? out[*current] : loose;
        target += line + "\n";
    }
    for (auto& [_, text] : out) text = trim(text);
    loose = trim(loose);
    if (!loose.empty()) {
        for (std::size_t c : fallbackClasses) {
            auto& text = out[c];
            text = text.empty() ? loose : loose + "\n" + text;
        }
    }
    return out;
}

std::string formatReflectionSections(const std::map<std::size_t, std::string>& perClass,
                                     const std::vector<std::string>& labels) {
    std::string out;
    for (const auto& [c, text] : perClass) {
        if (!out.empty()) out += "\n\n";
        out += "## " + (c < labels.size() ? labels[c] : std::to_string(c)) + "\n" + text;
    }
    return out;
}

std::map<std::size_t, std::string> generateReflection(AgentContext& ctx, const std::vector<ReflectionRecord>& batch) {
    requireLabels(ctx);
    if (batch.empty()) throw ContractError("reflection needs at least one record");
    const auto [correct, incorrect] = recordSections(ctx, batch);
    const auto messages = renderPrompt(TemplateId::reflectionGenerate, {{"task", ctx.options.task},
                                                                        {"labels", joinLabels(ctx.options.labels)},
                                                                        {"correct", correct},
                                                                        {"incorrect", incorrect}});
    const auto r = callModel(ctx, CallCategory::reflect, TemplateId::reflectionGenerate, messages,
                             ctx.options.generateTemperature);
    return parseReflectionSections(r.text, ctx.options.labels, classesIn(batch));
}

void updateReflection(AgentContext& ctx, ReflectionState& state, const std::vector<ReflectionRecord>& batch) {
    if (batch.empty()) return;
    requireLabels(ctx);
    if (state.perClass.empty()) throw ContractError("reflection update needs a prior reflection");
    const auto [correct, incorrect] = recordSections(ctx, batch);
    const auto messages =
        renderPrompt(TemplateId::reflectionUpdate, {{"task", ctx.options.task},
                                                    {"labels", joinLabels(ctx.options.labels)},
                                                    {"prior", formatReflectionSections(state.perClass, ctx.options.labels)},
                                                    {"correct", correct},
                                                    {"incorrect", incorrect}});
    const auto r = callModel(ctx, CallCategory::reflect, TemplateId::reflectionUpdate, messages,
                             ctx.options.generateTemperature);
    for (auto& [c, text] : parseReflectionSections(r.text, ctx.options.labels, classesIn(batch))) {
        state.perClass[c] = std::move(text);
    }
    ++state.steps;
}

std::string summarizeReflections(AgentContext& ctx, ReflectionState& state) {
    requireLabels(ctx);
    if (state.perClass.empty()) throw ContractError("nothing to summarize: no class reflection yet");
    const auto messages = renderPrompt(
        TemplateId::reflectionSummarize,
        {{"task", ctx.options.task},
         {"labels", joinLabels(ctx.options.labels)},
         {"reflections", formatReflectionSections(state.perClass, ctx.options.labels)}});
    const auto r = callModel(ctx, CallCategory::reflect, TemplateId::reflectionSummarize, messages,
                             ctx.options.generateTemperature);
    state.summary = trim(r.text);
    return state.summary;
}

ReflectionState reflect(AgentContext& ctx, const std::vector<ReflectionRecord>& records, std::size_t iteration) {
    if (records.empty()) throw ContractError("reflection needs at least one record");
    ReflectionState state;
    state.iteration = iteration;
    const std::size_t b = ctx.options.reflectionBatch;
    for (std::size_t start = 0; start < records.size(); start += b) {
        const std::vector<ReflectionRecord> batch(records.begin() + static_cast<std::ptrdiff_t>(start),
                                                  records.begin() + static_cast<std::ptrdiff_t>(std::min(records.size(), start + b)));
        if (start == 0) {
            state.perClass = generateReflection(ctx, batch);
            ++state.steps;
        } else {
            updateReflection(ctx, state, batch);
        }
    }
    summarizeReflections(ctx, state);
    return state;
}

Refinement refineText(AgentContext& ctx, const std::string& guideline, const std::vector<std::string>& segments,
                      const data::SegmentationPolicy& policy, std::size_t minSegments) {
    if (trim(guideline).empty()) throw ContractError("refinement needs a non-empty reflection");
    const auto messages = renderPrompt(TemplateId::refinement, {{"task", ctx.options.task},
                                                                {"guideline", guideline},
                                                                {"text", reportText(ctx, segments)}});
    const auto r = callModel(ctx, CallCategory::refine, TemplateId::refinement, messages,
                             ctx.options.generateTemperature);
    std::string body = r.text;
    if (auto inner = promptBlock(body, "text")) body = *inner;
    Refinement out;
    try {
        out.segments = data::segmentText(body, policy);
    } catch (const ContractError&) {
        out.segments.clear();
    }
    if (out.segments.size() < std::max<std::size_t>(minSegments, 1)) {
        out.warning = "refined text has " + std::to_string(out.segments.size()) + " segment(s), fewer than " +
                      std::to_string(minSegments) + "; keeping the original";
        spdlog::debug("{}", out.warning);
        out.segments = segments;
        out.fellBack = true;
    }
    return out;
}

}  // namespace timexl::agents
