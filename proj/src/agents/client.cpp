#include "timexl/agents/client.hpp"

#include "timexl/error.hpp"

namespace timexl::agents {

std::string toString(CallCategory category) {
    switch (category) {
        case CallCategory::predict: return "predict";
        case CallCategory::reflect: return "reflect";
        case CallCategory::refine: return "refine";
        case CallCategory::probe: return "probe";
    }
    return "unknown";
}

UsageTotals& UsageTotals::operator+=(const UsageTotals& other) {
    calls += other.calls;
    inputTokens += other.inputTokens;
    outputTokens += other.outputTokens;
    seconds += other.seconds;
    return *this;
}

void UsageLedger::record(CallCategory category, const ChatResponse& response) {
    std::lock_guard lock(mutex_);
    auto& t = totals_[category];
    t.calls += 1;
    t.inputTokens += response.inputTokens;
    t.outputTokens += response.outputTokens;
    t.seconds += response.seconds;
}

UsageTotals UsageLedger::totals(CallCategory category) const {
    std::lock_guard lock(mutex_);
    const auto it = totals_.find(category);
    return it == totals_.end() ? UsageTotals{} : it->second;
}

UsageTotals UsageLedger::overall() const {
    std::lock_guard lock(mutex_);
    UsageTotals sum;
    for (const auto& [_, t] : totals_) sum += t;
    return sum;
}

std::map<CallCategory, UsageTotals> UsageLedger::snapshot() const {
    std::lock_guard lock(mutex_);
    return totals_;
}

std::map<CallCategory, UsageTotals> usageDelta(const std::map<CallCategory, UsageTotals>& before,
                                               const std::map<CallCategory, UsageTotals>& after) {
    std::map<CallCategory, UsageTotals> out;
    for (CallCategory c : {CallCategory::predict, CallCategory::reflect, CallCategory::refine, CallCategory::probe}) {
        UsageTotals a, b;
        if (auto it = after.find(c); it != after.end()) a = it->second;
        if (auto it = before.find(c); it != before.end()) b = it->second;
        out[c] = {a.calls - b.calls, a.inputTokens - b.inputTokens, a.outputTokens - b.outputTokens,
                  a.seconds - b.seconds};
    }
    return out;
}

nlohmann::ordered_json toJson(const std::map<CallCategory, UsageTotals>& usage, bool withSeconds) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& [c, t] : usage) {
        nlohmann::ordered_json row;
        row["calls"] = t.calls;
        row["input_tokens"] = t.inputTokens;
        row["output_tokens"] = t.outputTokens;
        if (withSeconds) row["seconds"] = t.seconds;
        doc[toString(c)] = std::move(row);
    }
    return doc;
}

nlohmann::ordered_json toJson(const TranscriptEntry& e) {
    nlohmann::ordered_json doc;
    doc["category"] = toString(e.category);
    doc["template"] = e.templateId;
    doc["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : e.messages) doc["messages"].push_back({{"role", m.role}, {"content", m.content}});
    doc["response"] = e.response.text;
    doc["usage"] = {{"input_tokens", e.response.inputTokens}, {"output_tokens", e.response.outputTokens}};
    doc["seconds"] = e.response.seconds;
    doc["attempts"] = e.attempts;
    return doc;
}

Transcript::Transcript(const std::filesystem::path& file)
    : out_(std::make_unique<std::ofstream>(file, std::ios::binary | std::ios::app)) {
    if (!*out_) throw IoError("cannot open transcript " + file.string());
}

void Transcript::append(const TranscriptEntry& entry) {
    std::lock_guard lock(mutex_);
    entries_.push_back(entry);
    if (out_) {
        *out_ << toJson(entry).dump() << '\n';
        out_->flush();
    }
}

void Transcript::appendAll(const std::vector<TranscriptEntry>& entries) {
    for (const auto& e : entries) append(e);
}

std::vector<TranscriptEntry> Transcript::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t Transcript::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

}  // namespace timexl::agents
