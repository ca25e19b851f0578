#include "timexl/eval/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "timexl/error.hpp"

namespace timexl::eval {

namespace {

void checkLabels(std::span<const std::size_t> labels, std::size_t classes, const char* what) {
    for (std::size_t y : labels) {
        if (y >= classes) {
            throw ContractError(std::string(what) + " label " + std::to_string(y) + " outside [0, " +
                                std::to_string(classes) + ")");
        }
    }
}

// Mann-Whitney AUC for one class via average ranks.
double binaryAuc(const std::vector<double>& scores, const std::vector<bool>& positive) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rankSumPos = 0.0;
    double nPos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (positive[order[k]]) {
                rankSumPos += midrank;
                nPos += 1.0;
            }
        }
        i = j + 1;
    }
    const double nNeg = static_cast<double>(n) - nPos;
    return (rankSumPos - nPos * (nPos + 1.0) / 2.0) / (nPos * nNeg);
}

}  // namespace

std::vector<std::vector<std::size_t>> confusionMatrix(std::span<const std::size_t> truth,
                                                      std::span<const std::size_t> predicted,
                                                      std::size_t classes) {
    if (truth.size() != predicted.size()) {
        throw ContractError("metrics: " + std::to_string(truth.size()) + " labels but " +
                            std::to_string(predicted.size()) + " predictions");
    }
    checkLabels(truth, classes, "true");
    checkLabels(predicted, classes, "predicted");
    std::vector<std::vector<std::size_t>> m(classes, std::vector<std::size_t>(classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) ++m[truth[i]][predicted[i]];
    return m;
}

double macroF1(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
               std::size_t classes) {
    const auto m = confusionMatrix(truth, predicted, classes);
    if (classes == 0) return 0.0;
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        double tp = static_cast<double>(m[c][c]);
        double fp = 0.0, fn = 0.0;
        for (std::size_t o = 0; o < classes; ++o) {
            if (o == c) continue;
            fp += static_cast<double>(m[o][c]);
            fn += static_cast<double>(m[c][o]);
        }
        const double denom = 2.0 * tp + fp + fn;
        total += denom > 0.0 ? 2.0 * tp / denom : 0.0;
    }
    return total / static_cast<double>(classes);
}

double aurocOvR(std::span<const std::size_t> truth, const std::vector<std::vector<double>>& scores,
                std::size_t classes, std::vector<std::size_t>* excluded) {
    if (truth.size() != scores.size()) {
        throw ContractError("metrics: " + std::to_string(truth.size()) + " labels but " +
                            std::to_string(scores.size()) + " score vectors");
    }
    checkLabels(truth, classes, "true");
    for (const auto& s : scores) {
        if (s.size() != classes) throw ContractError("metrics: score vector length differs from class count");
    }
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> col(truth.size());
        std::vector<bool> pos(truth.size());
        std::size_t nPos = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            col[i] = scores[i][c];
            pos[i] = truth[i] == c;
            nPos += pos[i];
        }
        if (nPos == 0 || nPos == truth.size()) {
            if (excluded) excluded->push_back(c);
            continue;
        }
        total += binaryAuc(col, pos);
        ++used;
    }
    return used == 0 ? 0.5 : total / static_cast<double>(used);
}

MetricsReport evaluate(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                       const std::vector<std::vector<double>>& scores, std::size_t classes) {
    MetricsReport r;
    r.confusion = confusionMatrix(truth, predicted, classes);
    r.count = truth.size();
    r.macroF1 = macroF1(truth, predicted, classes);
    r.auc = aurocOvR(truth, scores, classes);
    std::size_t correct = 0;
    for (std::size_t c = 0; c < classes; ++c) correct += r.confusion[c][c];
    r.accuracy = r.count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(r.count);
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t predictedC = 0, trueC = 0;
        for (std::size_t o = 0; o < classes; ++o) {
            predictedC += r.confusion[o][c];
            trueC += r.confusion[c][o];
        }
        const double tp = static_cast<double>(r.confusion[c][c]);
        r.precision.push_back(predictedC ? tp / static_cast<double>(predictedC) : 0.0);
        r.recall.push_back(trueC ? tp / static_cast<double>(trueC) : 0.0);
    }
    return r;
}

nlohmann::ordered_json toJson(const MetricsReport& r) {
    nlohmann::ordered_json doc;
    doc["macro_f1"] = r.macroF1;
    doc["auc"] = r.auc;
    doc["accuracy"] = r.accuracy;
    doc["precision"] = r.precision;
    doc["recall"] = r.recall;
    doc["confusion"] = r.confusion;
    doc["count"] = r.count;
    return doc;
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw ContractError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

}  // namespace timexl::eval
