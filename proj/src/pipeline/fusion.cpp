#include "timexl/pipeline/fusion.hpp"

#include "timexl/error.hpp"
#include "timexl/eval/metrics.hpp"

namespace timexl::pipeline {

std::vector<double> fusePredictions(const std::vector<double>& encoder, const agents::LabelPrediction& llm,
                                    double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw ContractError("fusion weight outside [0, 1]");
    if (llm.status != agents::ParseStatus::ok || !llm.label) return encoder;
    if (*llm.label >= encoder.size()) throw ContractError("LLM label outside the encoder's class range");
    std::vector<double> out(encoder.size());
    for (std::size_t c = 0; c < encoder.size(); ++c) {
        out[c] = alpha * encoder[c] + (1.0 - alpha) * (c == *llm.label ? 1.0 : 0.0);
    }
    return out;
}

double alphaGrid(std::size_t k) { return static_cast<double>(k) / 10.0; }

AlphaSelection selectAlpha(const std::vector<FusionRecord>& records, std::size_t classes) {
    if (records.empty()) throw ContractError("alpha selection needs validation records");
    std::vector<std::size_t> truth;
    for (const auto& r : records) truth.push_back(r.truth);
    AlphaSelection best;
    bool first = true;
    for (std::size_t k = 0; k <= 10; ++k) {
        const double alpha = alphaGrid(k);
        std::vector<std::vector<double>> scores;
        std::vector<std::size_t> labels;
        for (const auto& r : records) {
            scores.push_back(fusePredictions(r.encoder, r.llm, alpha));
            labels.push_back(eval::argmax(scores.back()));
        }
        const double f1 = eval::macroF1(truth, labels, classes);
        const double auc = eval::aurocOvR(truth, scores, classes);
        // Ascending alpha, so >= on the tie keeps the larger alpha.
        if (first || f1 > best.macroF1 || (f1 == best.macroF1 && auc >= best.auc)) {
            best = {alpha, f1, auc};
            first = false;
        }
    }
    return best;
}

}  // namespace timexl::pipeline
