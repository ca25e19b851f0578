#pragma once

#include <cstddef>
#include <vector>

#include "timexl/agents/agent.hpp"

namespace timexl::pipeline {

// alpha * encoder + (1 - alpha) * onehot(llm). A failed LLM answer leaves the
// encoder distribution unchanged.
std::vector<double> fusePredictions(const std::vector<double>& encoder, const agents::LabelPrediction& llm,
                                    double alpha);

struct FusionRecord {
    std::vector<double> encoder;
    agents::LabelPrediction llm;
    std::size_t truth = 0;
};

struct AlphaSelection {
    double alpha = 1.0;
    double macroF1 = 0.0;
    double auc = 0.0;
};

// Grid 0.0, 0.1, ..., 1.0; best fused macro-F1, then fused AUC, then larger alpha.
AlphaSelection selectAlpha(const std::vector<FusionRecord>& records, std::size_t classes);

// alpha on the 0.1 grid, k / 10 computed exactly.
double alphaGrid(std::size_t k);

}  // namespace timexl::pipeline
