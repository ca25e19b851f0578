#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "timexl/data/segmentation.hpp"
#include "timexl/numerics/tensor.hpp"

namespace timexl::data {

enum class Split { unassigned, train, validation, test };

std::string toString(Split split);
Split splitFromString(const std::string& name);

enum class TaskKind { classification, regression };

// One (x, s, y) instance.
struct MultiModalSample {
    std::string id;
    std::optional<std::int64_t> timestamp;
    numerics::Tensor series;               // channels x steps
    std::vector<std::string> segments;     // ordered text units
    numerics::Tensor embeddings;           // embedding dim x segments; empty until embedded
    std::size_t label = 0;                 // class index
    std::optional<double> target;          // continuous target (regression task)
    Split split = Split::unassigned;

    bool embedded() const noexcept {
        return embeddings.rank() == 2 && embeddings.dim(1) == segments.size();
    }
};

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

// Tokens planted by the synthetic generator. Empty for real datasets.
struct SyntheticVocabulary {
    std::vector<std::string> indicatorTokens;  // one per class, in label order
    std::vector<std::string> noiseTokens;
    std::string cuePrefix;                     // latent cue tokens: <prefix><label>-<nonce>
};

struct DatasetManifest {
    std::vector<std::string> labelNames;
    std::size_t channels = 0;
    std::size_t steps = 0;
    TaskKind task = TaskKind::classification;
    SegmentationPolicy segmentation;
    std::optional<NormalizationStats> normalization;
    std::array<double, 3> splitRatios{0.6, 0.2, 0.2};
    std::optional<SyntheticVocabulary> vocabulary;

    std::size_t classCount() const noexcept { return labelNames.size(); }
};

// Samples carrying the given split tag, in dataset order.
std::vector<const MultiModalSample*> selectSplit(const std::vector<MultiModalSample>& samples,
                                                 Split split);

std::string joinSegments(const std::vector<std::string>& segments, std::size_t first,
                         std::size_t count);

}  // namespace timexl::data
