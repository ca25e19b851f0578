#include "timexl/agents/scripted.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "timexl/agents/prompts.hpp"
#include "timexl/error.hpp"

namespace timexl::agents {

namespace {

const std::vector<std::string> kActions = {"respond", "echo", "guess", "vote", "refine", "value"};

std::vector<std::string> promptLabels(const std::string& user) {
    static const std::regex line("(^|\n)Labels: ([^\n]*)");
    std::smatch m;
    if (!std::regex_search(user, m, line)) throw ContractError("scripted client: prompt lists no labels");
    std::vector<std::string> labels;
    std::stringstream in(m[2].str());
    for (std::string label; std::getline(in, label, ',');) {
        const auto a = label.find_first_not_of(' ');
        if (a != std::string::npos) labels.push_back(label.substr(a));
    }
    return labels;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// A word with surrounding punctuation removed, lower-cased.
std::string bare(const std::string& word) {
    std::size_t a = 0, b = word.size();
    const auto keep = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    while (a < b && !keep(word[a])) ++a;
    while (b > a && !keep(word[b - 1])) --b;
    return lower(word.substr(a, b - a));
}

std::string block(const std::string& user, const nlohmann::json& params) {
    const std::string name = params.value("block", "text");
    auto b = promptBlock(user, name);
    if (!b) throw ContractError("scripted client: prompt has no <" + name + "> block");
    return *b;
}

std::string refineText(const std::string& text, const nlohmann::json& params) {
    std::vector<std::string> drop;
    for (const auto& t : params.value("drop_tokens", nlohmann::json::array())) drop.push_back(lower(t.get<std::string>()));
    std::vector<std::string> kept;
    for (const auto& line : lines(text)) {
        std::vector<std::string> out;
        for (const auto& w : words(line)) {
            if (std::find(drop.begin(), drop.end(), bare(w)) == drop.end()) {
                out.push_back(w);
                continue;
            }
            // keep the sentence boundary the dropped word carried
            std::size_t end = w.size();
            while (end > 0 && std::ispunct(static_cast<unsigned char>(w[end - 1]))) --end;
            if (!out.empty() && end < w.size()) {
                std::string& prev = out.back();
                while (!prev.empty() && std::ispunct(static_cast<unsigned char>(prev.back()))) prev.pop_back();
                prev += w.substr(end);
            }
        }
        if (out.empty()) continue;
        std::string joined;
        for (const auto& w : out) joined += (joined.empty() ? "" : " ") + w;
        kept.push_back(joined);
    }
    if (params.contains("restore")) {
        const auto& r = params["restore"];
        const std::string cuePrefix = lower(r.value("cue_prefix", "cue-"));
        const std::string hintPrefix = lower(r.value("indicator_prefix", "hint-"));
        const double p = r.value("probability", 1.0);
        std::optional<std::string> label;
        for (const auto& line : kept) {
            for (const auto& w : words(line)) {
                const std::string b = bare(w);
                if (b.rfind(cuePrefix, 0) != 0) continue;
                const std::string rest = b.substr(cuePrefix.size());
                const auto dash = rest.rfind('-');
                if (dash == std::string::npos || hashUnit(b) >= p) continue;
                label = rest.substr(0, dash);
            }
        }
        if (label) {
            for (auto& line : kept) {
                std::string rebuilt;
                for (const auto& w : words(line)) {
                    std::string out = w;
                    const std::string b = bare(w);
                    if (b.rfind(hintPrefix, 0) == 0) {
                        const auto pos = lower(w).find(b);
                        out = w.substr(0, pos) + hintPrefix + *label + w.substr(pos + b.size());
                    }
                    if (!rebuilt.empty()) rebuilt += ' ';
                    rebuilt += out;
                }
                line = rebuilt;
            }
        }
    }
    std::string out;
    for (const auto& line : kept) {
        if (!out.empty()) out += '\n';
        out += line;
    }
    return out;
}

}  // namespace

double hashUnit(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

ScriptedClient::ScriptedClient(const nlohmann::json& script) {
    if (!script.is_object() || !script.contains("rules") || !script["rules"].is_array()) {
        throw InvalidConfigError("scripted client: script needs a \"rules\" array");
    }
    model_ = script.value("model", "scripted");
    for (std::size_t i = 0; i < script["rules"].size(); ++i) {
        const auto& r = script["rules"][i];
        Rule rule;
        rule.templateId = r.value("template", "*");
        if (rule.templateId != "*") templateIdFromString(rule.templateId);
        rule.action = r.value("action", "respond");
        if (std::find(kActions.begin(), kActions.end(), rule.action) == kActions.end()) {
            throw InvalidConfigError("scripted client: rule " + std::to_string(i) + " has unknown action '" +
                                     rule.action + "'");
        }
        if (r.contains("match")) {
            try {
                rule.match = std::regex(r["match"].get<std::string>());
            } catch (const std::regex_error& e) {
                throw InvalidConfigError("scripted client: rule " + std::to_string(i) + " has a bad regex: " + e.what());
            }
        }
        if (rule.action == "respond" && !r.contains("text") && !r.contains("sequence")) {
            throw InvalidConfigError("scripted client: respond rule " + std::to_string(i) + " needs text or sequence");
        }
        rule.params = r;
        rules_.push_back(std::move(rule));
    }
}

ScriptedClient ScriptedClient::fromFile(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read script " + file.string());
    try {
        return ScriptedClient(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidConfigError("script " + file.string() + " is not valid JSON: " + e.what());
    }
}

std::size_t ScriptedClient::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::string ScriptedClient::respond(Rule& rule, const std::string& user) const {
    const auto& p = rule.params;
    if (rule.action == "respond") {
        if (p.contains("sequence")) {
            const auto& seq = p["sequence"];
            return seq.at(std::min(rule.fired, seq.size() - 1)).get<std::string>();
        }
        return p["text"].get<std::string>();
    }
    if (rule.action == "echo") return block(user, p);
    if (rule.action == "value") return "ANSWER: " + p.value("value", std::string("0"));
    if (rule.action == "refine") return refineText(block(user, p), p);

    const auto labels = promptLabels(user);
    if (labels.empty()) throw ContractError("scripted client: empty label list");
    const auto guess = [&] { return "ANSWER: " + labels[static_cast<std::size_t>(hashUnit(user) * labels.size())]; };
    if (rule.action == "guess") return guess();

    // vote
    std::string scope = block(user, p);
    if (p.contains("extract")) {
        const std::regex extract(p["extract"].get<std::string>());
        std::string picked;
        for (const auto& line : lines(scope)) {
            std::smatch m;
            if (std::regex_search(line, m, extract) && m.size() > 1) picked += m[1].str() + "\n";
        }
        scope = picked;
    }
    const std::string prefix = lower(p.value("prefix", "hint-"));
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& w : words(scope)) {
        const std::string b = bare(w);
        if (b.rfind(prefix, 0) != 0) continue;
        const std::string rest = b.substr(prefix.size());
        for (std::size_t c = 0; c < labels.size(); ++c) {
            const std::string name = normalizeLabel(labels[c]);
            if (rest == name || rest.rfind(name + "-", 0) == 0) ++counts[c];
        }
    }
    const auto best = std::max_element(counts.begin(), counts.end());
    if (*best == 0) {
        if (p.value("fallback", "guess") == "abstain") return "The evidence does not settle it.";
        return guess();
    }
    std::size_t label = static_cast<std::size_t>(best - counts.begin());
    if (p.value("invert", false)) label = (label + 1) % labels.size();
    return "The strongest evidence names " + labels[label] + ".\nANSWER: " + labels[label];
}

ChatResponse ScriptedClient::complete(const ChatRequest& request) {
    std::string user;
    std::size_t input = 0;
    for (const auto& m : request.messages) {
        input += countTokens(m.content);
        if (m.role == "user") user += m.content;
    }
    std::lock_guard lock(mutex_);
    ++calls_;
    for (auto& rule : rules_) {
        if (rule.templateId != "*" && rule.templateId != request.templateId) continue;
        if (rule.match && !std::regex_search(user, *rule.match)) continue;
        ChatResponse r;
        r.text = respond(rule, user);
        ++rule.fired;
        r.inputTokens = input;
        r.outputTokens = countTokens(r.text);
        return r;
    }
    throw ContractError("scripted client: no rule answers template '" + request.templateId + "'");
}

}  // namespace timexl::agents
