#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "json.hpp"
#include "timexl/agents/client.hpp"

namespace timexl::agents {

// Deterministic offline client driven by a rule document:
//
//   {"model": "scripted", "rules": [{"template": "prediction", "match": "regex", "action": "vote", ...}]}
//
// Rules are tried top to bottom; the first whose template ("*" matches any)
// and optional regex (searched in the user message) fit answers. Actions:
//   respond   "text", or "sequence" of texts indexed by how often the rule fired
//   echo      contents of prompt block "block"
//   guess     "ANSWER: <label>" picked by a hash of the user message
//   vote      counts tokens "<prefix><label>" in block "block" (optionally only
//             in the first capture group of "extract" per line) and answers the
//             most frequent label; "invert" answers the next label instead;
//             without any token it falls back to "fallback": "guess" or "abstain"
//   refine    returns the lines of block "block" with the words listed in
//             "drop_tokens" deleted (emptied lines vanish); "restore" {"cue_prefix", "indicator_prefix",
//             "probability"} rewrites indicator tokens to the label named by a
//             cue token, for a hash-selected fraction of cues
//   value     "ANSWER: <value>"
// Token usage is the whitespace word count; reported latency is zero.
class ScriptedClient final : public LlmClient {
public:
    explicit ScriptedClient(const nlohmann::json& script);
    static ScriptedClient fromFile(const std::filesystem::path& file);

    std::string model() const override { return model_; }
    ChatResponse complete(const ChatRequest& request) override;
    std::size_t calls() const;

private:
    struct Rule {
        std::string templateId;
        std::optional<std::regex> match;
        std::string action;
        nlohmann::json params;
        std::size_t fired = 0;
    };

    std::string respond(Rule& rule, const std::string& user) const;

    std::string model_;
    std::vector<Rule> rules_;
    mutable std::mutex mutex_;
    std::size_t calls_ = 0;
};

// Deterministic value in [0, 1) derived from a string.
double hashUnit(std::string_view text);

}  // namespace timexl::agents
