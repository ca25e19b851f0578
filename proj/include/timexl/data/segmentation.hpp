#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace timexl::data {

enum class SegmentationKind { sentence, halfSentence, fixedTokenWindow };

struct SegmentationPolicy {
    SegmentationKind kind = SegmentationKind::sentence;
    std::size_t windowSize = 16;  // tokens per segment for fixedTokenWindow

    friend bool operator==(const SegmentationPolicy&, const SegmentationPolicy&) = default;
};

// "sentence", "half-sentence", "fixed-token-window"
std::string toString(SegmentationKind kind);
SegmentationKind segmentationKindFromString(const std::string& name);

// Splits raw text into ordered segments.
//  - sentence: cut after runs of . ! ? followed by whitespace or end of text
//  - half-sentence: additionally cut after , and ;
//  - fixed-token-window: groups of windowSize whitespace-separated tokens
// Segments are trimmed; segments without any letter or digit are dropped.
// Throws ContractError for empty text.
std::vector<std::string> segmentText(std::string_view text, const SegmentationPolicy& policy);

}  // namespace timexl::data
