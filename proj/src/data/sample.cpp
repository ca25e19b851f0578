#include "timexl/data/sample.hpp"

#include "timexl/error.hpp"

namespace timexl::data {

std::string toString(Split split) {
    switch (split) {
        case Split::unassigned: return "unassigned";
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "unassigned";
}

Split splitFromString(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "validation") return Split::validation;
    if (name == "test") return Split::test;
    if (name == "unassigned") return Split::unassigned;
    throw SchemaError("unknown split '" + name + "'");
}

std::vector<const MultiModalSample*> selectSplit(const std::vector<MultiModalSample>& samples,
                                                 Split split) {
    std::vector<const MultiModalSample*> out;
    for (const auto& s : samples) {
        if (s.split == split) out.push_back(&s);
    }
    return out;
}

std::string joinSegments(const std::vector<std::string>& segments, std::size_t first,
                         std::size_t count) {
    std::string out;
    for (std::size_t i = first; i < first + count && i < segments.size(); ++i) {
        if (!out.empty()) out += ' ';
        out += segments[i];
    }
    return out;
}

}  // namespace timexl::data
