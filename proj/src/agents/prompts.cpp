#include "timexl/agents/prompts.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "timexl/error.hpp"

namespace timexl::agents {

namespace {

const std::string kAnalyst =
    "You are a careful analyst of multimodal records. Each record pairs a numeric time series with a "
    "short written report.";

const std::string kAnswerRule = "End your reply with one final line of the form\nANSWER: <label>";

std::vector<PromptTemplate> buildTemplates() {
    std::vector<PromptTemplate> t;
    t.push_back({TemplateId::prediction, kAnalyst,
                 "Task: {{task}}\n"
                 "Labels: {{labels}}\n\n"
                 "A prototype model compared this record with reference cases it learned during training. "
                 "Each line pairs a reference segment and its class with the most similar part of this record:\n"
                 "<explanations>\n{{explanations}}\n</explanations>\n\n"
                 "Report:\n<text>\n{{text}}\n</text>\n\n"
                 "Weigh the reference cases together with the report and pick one label. " +
                     kAnswerRule});
    t.push_back({TemplateId::predictionTextOnly, kAnalyst,
                 "Task: {{task}}\n"
                 "Labels: {{labels}}\n\n"
                 "Report:\n<text>\n{{text}}\n</text>\n\n"
                 "Read the report and pick one label. " +
                     kAnswerRule});
    t.push_back({TemplateId::reflectionGenerate, kAnalyst,
                 "Task: {{task}}\n"
                 "Labels: {{labels}}\n\n"
                 "Below are reports with their true label and the label that was predicted from them.\n"
                 "Correctly predicted:\n<correct>\n{{correct}}\n</correct>\n"
                 "Mispredicted:\n<incorrect>\n{{incorrect}}\n</incorrect>\n\n"
                 "For each label, write notes on which kinds of content in a report point towards it and "
                 "which content misled the prediction. Start the notes of each label with a line "
                 "\"## <label>\"."});
    t.push_back({TemplateId::reflectionUpdate, kAnalyst,
                 "Task: {{task}}\n"
                 "Labels: {{labels}}\n\n"
                 "Current notes:\n<prior>\n{{prior}}\n</prior>\n\n"
                 "New reports with their true label and the predicted label.\n"
                 "Correctly predicted:\n<correct>\n{{correct}}\n</correct>\n"
                 "Mispredicted:\n<incorrect>\n{{incorrect}}\n</incorrect>\n\n"
                 "Revise the notes so they also account for the new reports. Keep what still holds. Start "
                 "the notes of each label with a line \"## <label>\"."});
    t.push_back({TemplateId::reflectionSummarize, kAnalyst,
                 "Task: {{task}}\n"
                 "Labels: {{labels}}\n\n"
                 "Notes collected for each label:\n<reflections>\n{{reflections}}\n</reflections>\n\n"
                 "Merge them into one guideline for rewriting reports so that the content relevant to the "
                 "label stands out and distracting content is removed."});
    t.push_back({TemplateId::refinement, kAnalyst,
                 "Task: {{task}}\n\n"
                 "Guideline:\n<guideline>\n{{guideline}}\n</guideline>\n\n"
                 "Report:\n<text>\n{{text}}\n</text>\n\n"
                 "Rewrite the report following the guideline. Keep facts that bear on the task, drop "
                 "distracting content and do not invent new facts. Reply with the rewritten report only."});
    t.push_back({TemplateId::regressionPrediction, kAnalyst,
                 "Task: {{task}}\n\n"
                 "A prototype model compared this record with reference cases it learned during training:\n"
                 "<explanations>\n{{explanations}}\n</explanations>\n\n"
                 "Report:\n<text>\n{{text}}\n</text>\n\n"
                 "Estimate the target value. End your reply with one final line of the form\n"
                 "ANSWER: <number>"});
    return t;
}

const std::vector<PromptTemplate>& templates() {
    static const std::vector<PromptTemplate> t = buildTemplates();
    return t;
}

std::string substitute(const PromptTemplate& tpl, const std::string& body, const PromptFields& fields) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t open = body.find("{{", pos);
        if (open == std::string::npos) {
            out.append(body, pos, std::string::npos);
            break;
        }
        const std::size_t close = body.find("}}", open);
        if (close == std::string::npos) throw RenderError("unterminated placeholder in " + toString(tpl.id));
        const std::string name = body.substr(open + 2, close - open - 2);
        const auto it = fields.find(name);
        if (it == fields.end()) {
            throw RenderError("template " + toString(tpl.id) + " is missing placeholder '" + name + "'");
        }
        out.append(body, pos, open - pos);
        out += it->second;
        pos = close + 2;
    }
    return out;
}

std::string lastAnswerPayload(std::string_view response, bool& found) {
    std::istringstream in{std::string(response)};
    std::string payload;
    found = false;
    for (std::string line; std::getline(in, line);) {
        std::size_t i = 0;
        while (i < line.size() && (std::isspace(static_cast<unsigned char>(line[i])) || line[i] == '*' ||
                                   line[i] == '#' || line[i] == '>')) {
            ++i;
        }
        static const std::string key = "answer";
        if (line.size() - i < key.size()) continue;
        bool match = true;
        for (std::size_t k = 0; k < key.size(); ++k) {
            if (std::tolower(static_cast<unsigned char>(line[i + k])) != key[k]) match = false;
        }
        if (!match) continue;
        std::size_t j = i + key.size();
        while (j < line.size() && (line[j] == '*' || line[j] == ' ')) ++j;
        if (j >= line.size() || line[j] != ':') continue;
        payload = line.substr(j + 1);
        found = true;
    }
    return payload;
}

}  // namespace

std::string toString(TemplateId id) {
    switch (id) {
        case TemplateId::prediction: return "prediction";
        case TemplateId::predictionTextOnly: return "prediction-text-only";
        case TemplateId::reflectionGenerate: return "reflection-generate";
        case TemplateId::reflectionUpdate: return "reflection-update";
        case TemplateId::reflectionSummarize: return "reflection-summarize";
        case TemplateId::refinement: return "refinement";
        case TemplateId::regressionPrediction: return "regression-prediction";
    }
    return "unknown";
}

TemplateId templateIdFromString(const std::string& name) {
    for (const auto& t : templates()) {
        if (toString(t.id) == name) return t.id;
    }
    throw InvalidConfigError("unknown prompt template '" + name + "'");
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> names;
    for (const std::string* body : {&system, &user}) {
        std::size_t pos = 0;
        while ((pos = body->find("{{", pos)) != std::string::npos) {
            const std::size_t close = body->find("}}", pos);
            if (close == std::string::npos) break;
            names.push_back(body->substr(pos + 2, close - pos - 2));
            pos = close + 2;
        }
    }
    return names;
}

const PromptTemplate& promptTemplate(TemplateId id) {
    for (const auto& t : templates()) {
        if (t.id == id) return t;
    }
    throw InvalidConfigError("unknown prompt template");
}

std::vector<ChatMessage> renderPrompt(TemplateId id, const PromptFields& fields) {
    if (id == TemplateId::prediction) {
        const auto it = fields.find("explanations");
        if (it != fields.end() && it->second.empty()) id = TemplateId::predictionTextOnly;
    }
    const auto& tpl = promptTemplate(id);
    std::vector<ChatMessage> messages = {{"system", substitute(tpl, tpl.system, fields)},
                                         {"user", substitute(tpl, tpl.user, fields)}};
    return messages;
}

std::optional<std::string> promptBlock(std::string_view prompt, std::string_view name) {
    const std::string open = "<" + std::string(name) + ">\n";
    const std::string close = "\n</" + std::string(name) + ">";
    const std::size_t a = prompt.find(open);
    if (a == std::string_view::npos) return std::nullopt;
    const std::size_t start = a + open.size();
    const std::size_t b = prompt.find(close, start);
    if (b == std::string_view::npos) return std::nullopt;
    return std::string(prompt.substr(start, b - start));
}

std::string formatExplanations(const std::vector<ExplanationLine>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        char score[32];
        std::snprintf(score, sizeof score, "%.3f", lines[i].score);
        if (i) out += '\n';
        out += std::to_string(i + 1) + ". prototype \"" + lines[i].prototypeText + "\" (" + lines[i].prototypeLabel +
               ") <-> \"" + lines[i].matchedText + "\" (score " + score + ")";
    }
    return out;
}

std::string normalizeLabel(std::string_view text) {
    std::string out;
    bool pendingDash = false;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            if (pendingDash && !out.empty()) out += '-';
            pendingDash = false;
            out += static_cast<char>(std::tolower(c));
        } else {
            pendingDash = true;
        }
    }
    return out;
}

std::optional<std::size_t> parseLabel(std::string_view response, const std::vector<std::string>& labels) {
    bool found = false;
    const std::string payload = normalizeLabel(lastAnswerPayload(response, found));
    if (!found || payload.empty()) return std::nullopt;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (normalizeLabel(labels[i]) == payload) return i;
    }
    return std::nullopt;
}

std::optional<double> parseValue(std::string_view response) {
    bool found = false;
    const std::string payload = lastAnswerPayload(response, found);
    if (!found) return std::nullopt;
    std::size_t i = 0;
    while (i < payload.size() && !(std::isdigit(static_cast<unsigned char>(payload[i])) || payload[i] == '-' ||
                                   payload[i] == '+' || payload[i] == '.')) {
        ++i;
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(payload.substr(i), &used);
        if (used == 0 || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::size_t countTokens(std::string_view text) {
    std::size_t n = 0;
    bool in = false;
    for (char ch : text) {
        const bool space = std::isspace(static_cast<unsigned char>(ch));
        if (!space && !in) ++n;
        in = !space;
    }
    return n;
}

}  // namespace timexl::agents
