#include "timexl/data/segmentation.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "timexl/error.hpp"

namespace timexl::data {

namespace {

bool isSpace(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && isSpace(s[b])) ++b;
    while (e > b && isSpace(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

bool hasAlnum(const std::string& s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; });
}

std::vector<std::string> splitOnPunctuation(std::string_view text, std::string_view breaks) {
    std::vector<std::string> out;
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (breaks.find(text[i]) != std::string_view::npos) {
            std::size_t j = i;
            while (j < text.size() && breaks.find(text[j]) != std::string_view::npos) ++j;
            if (j == text.size() || isSpace(text[j])) {
                std::string piece = trim(text.substr(start, j - start));
                if (hasAlnum(piece)) out.push_back(std::move(piece));
                start = j;
            }
            i = j;
        } else {
            ++i;
        }
    }
    std::string tail = trim(text.substr(start));
    if (hasAlnum(tail)) out.push_back(std::move(tail));
    return out;
}

}  // namespace

std::string toString(SegmentationKind kind) {
    switch (kind) {
        case SegmentationKind::sentence: return "sentence";
        case SegmentationKind::halfSentence: return "half-sentence";
        case SegmentationKind::fixedTokenWindow: return "fixed-token-window";
    }
    return "sentence";
}

SegmentationKind segmentationKindFromString(const std::string& name) {
    if (name == "sentence") return SegmentationKind::sentence;
    if (name == "half-sentence") return SegmentationKind::halfSentence;
    if (name == "fixed-token-window") return SegmentationKind::fixedTokenWindow;
    throw InvalidConfigError("unknown segmentation policy '" + name + "'");
}

std::vector<std::string> segmentText(std::string_view text, const SegmentationPolicy& policy) {
    if (trim(text).empty()) throw ContractError("cannot segment empty text");
    switch (policy.kind) {
        case SegmentationKind::sentence:
            return splitOnPunctuation(text, ".!?");
        case SegmentationKind::halfSentence:
            return splitOnPunctuation(text, ".!?,;");
        case SegmentationKind::fixedTokenWindow: {
            if (policy.windowSize == 0) throw InvalidConfigError("token window size must be >= 1");
            std::istringstream in{std::string(text)};
            std::vector<std::string> out;
            std::string token, current;
            std::size_t count = 0;
            while (in >> token) {
                if (count) current += ' ';
                current += token;
                if (++count == policy.windowSize) {
                    out.push_back(std::move(current));
                    current.clear();
                    count = 0;
                }
            }
            if (count) out.push_back(std::move(current));
            return out;
        }
    }
    return {};
}

}  // namespace timexl::data
