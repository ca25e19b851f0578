#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"

namespace timexl::eval {

struct MetricsReport {
    double macroF1 = 0.0;
    double auc = 0.0;
    double accuracy = 0.0;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
    std::size_t count = 0;
};

std::vector<std::vector<std::size_t>> confusionMatrix(std::span<const std::size_t> truth,
                                                      std::span<const std::size_t> predicted,
                                                      std::size_t classes);

// A class absent from both truth and prediction scores F1 = 0.
double macroF1(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
               std::size_t classes);

// One-vs-rest AUROC with midrank ties, macro-averaged over classes that have
// both positives and negatives. Returns 0.5 when every class is degenerate.
// `excluded`, when given, receives the skipped class indices.
double aurocOvR(std::span<const std::size_t> truth, const std::vector<std::vector<double>>& scores,
                std::size_t classes, std::vector<std::size_t>* excluded = nullptr);

MetricsReport evaluate(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                       const std::vector<std::vector<double>>& scores, std::size_t classes);

nlohmann::ordered_json toJson(const MetricsReport& report);

// Index of the largest entry; ties go to the smallest index.
std::size_t argmax(std::span<const double> values);

}  // namespace timexl::eval
