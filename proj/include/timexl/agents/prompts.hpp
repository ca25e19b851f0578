#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "timexl/agents/client.hpp"

namespace timexl::agents {

enum class TemplateId {
    prediction,
    predictionTextOnly,
    reflectionGenerate,
    reflectionUpdate,
    reflectionSummarize,
    refinement,
    regressionPrediction,
};

// "prediction", "prediction-text-only", "reflection-generate", ...
std::string toString(TemplateId id);
TemplateId templateIdFromString(const std::string& name);

// Placeholders are written {{name}}.
struct PromptTemplate {
    TemplateId id;
    std::string system;
    std::string user;

    std::vector<std::string> placeholders() const;
};

const PromptTemplate& promptTemplate(TemplateId id);

using PromptFields = std::map<std::string, std::string>;

// Throws RenderError naming the first missing placeholder. A prediction
// render with an empty "explanations" field uses the text-only template.
std::vector<ChatMessage> renderPrompt(TemplateId id, const PromptFields& fields);

// Text between <name> and </name> lines of a rendered prompt, if present.
std::optional<std::string> promptBlock(std::string_view prompt, std::string_view name);

struct ExplanationLine {
    std::string prototypeLabel;
    std::string prototypeText;
    std::string matchedText;
    double score = 0.0;
};

// Numbered lines: 1. prototype "<text>" (<label>) <-> "<matched>" (score 0.912)
std::string formatExplanations(const std::vector<ExplanationLine>& lines);

// Lower-cases and collapses runs of anything but letters and digits to '-'.
std::string normalizeLabel(std::string_view text);

// Label index named on the last line that starts with "ANSWER:" (any case).
std::optional<std::size_t> parseLabel(std::string_view response, const std::vector<std::string>& labels);

// Number after "ANSWER:" on the last such line.
std::optional<double> parseValue(std::string_view response);

// Whitespace-separated word count, used as the token estimate offline.
std::size_t countTokens(std::string_view text);

}  // namespace timexl::agents
