#include "timexl/encoder/training.hpp"

#include <cmath>
#include <numeric>

#include "timexl/error.hpp"
#include "timexl/numerics/adam.hpp"

namespace timexl::encoder {

using data::MultiModalSample;

namespace {

void checkData(std::span<const MultiModalSample* const> samples, const EncoderConfig& cfg, const char* split) {
    for (const auto* s : samples) {
        if (s->series.rank() != 2 || s->series.dim(0) != cfg.channels || s->series.dim(1) != cfg.steps) {
            throw ShapeError(std::string(split) + " sample " + s->id + " series shape " +
                             numerics::shapeString(s->series.shape()) + " does not match the encoder config");
        }
        if (!s->embedded() || s->embeddings.dim(0) != cfg.embeddingDim) {
            throw ShapeError(std::string(split) + " sample " + s->id + " lacks " + std::to_string(cfg.embeddingDim) +
                             "-dimensional segment embeddings");
        }
        if (cfg.regression && !s->target) {
            throw ContractError(std::string(split) + " sample " + s->id + " has no regression target");
        }
    }
}

void requireFiniteTerm(double value, const char* term, std::size_t epoch) {
    if (!std::isfinite(value)) {
        throw NumericError("non-finite " + std::string(term) + " loss in epoch " + std::to_string(epoch + 1));
    }
}

void accumulate(LossBreakdown& into, const LossBreakdown& b) {
    into.total += b.total;
    into.ce += b.ce;
    into.clustering += b.clustering;
    into.evidencing += b.evidencing;
    into.diversity += b.diversity;
    if (b.regression) into.regression = into.regression.value_or(0.0) + *b.regression;
}

}  // namespace

std::vector<double> pooledReconstruction(const Tensor& zTime, const EncoderModel& model) {
    const Tensor& P = model.timePrototypes;
    const auto sims = prototypeSimilarities(zTime, P);
    const std::size_t m = P.dim(0), h = P.dim(1), segs = zTime.dim(1);
    std::vector<double> pooled(h, 0.0);
    std::vector<double> a(m);
    for (std::size_t j = 0; j < segs; ++j) {
        double peak = sims.full.at(0, j);
        for (std::size_t i = 1; i < m; ++i) peak = std::max(peak, sims.full.at(i, j));
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) total += a[i] = std::exp(sims.full.at(i, j) - peak);
        for (std::size_t i = 0; i < m; ++i) {
            const double w = a[i] / total;
            for (std::size_t r = 0; r < h; ++r) pooled[r] += w * P.at(i, r);
        }
    }
    for (double& v : pooled) v /= static_cast<double>(segs);
    return pooled;
}

void refitRegressionHead(EncoderModel& model, std::span<const MultiModalSample* const> train,
                         std::size_t sweeps) {
    if (!model.config.regression) throw ContractError("regression head is disabled in the encoder config");
    if (train.empty()) throw ContractError("refitting the regression head needs training samples");
    const std::size_t h = model.config.timeFeatures;
    const double n = static_cast<double>(train.size());
    std::vector<std::vector<double>> features;
    std::vector<double> meanX(h, 0.0);
    double meanY = 0.0;
    for (const auto* s : train) {
        features.push_back(pooledReconstruction(encodeTime(s->series, model), model));
        for (std::size_t r = 0; r < h; ++r) meanX[r] += features.back()[r] / n;
        meanY += *s->target / n;
    }
    // Centred normal equations; the bias absorbs the means.
    std::vector<double> gram(h * h, 0.0), rhs(h, 0.0);
    for (std::size_t i = 0; i < features.size(); ++i) {
        const double y = *train[i]->target - meanY;
        for (std::size_t r = 0; r < h; ++r) {
            const double xr = features[i][r] - meanX[r];
            rhs[r] += xr * y;
            for (std::size_t q = 0; q < h; ++q) gram[r * h + q] += xr * (features[i][q] - meanX[q]);
        }
    }
    // Coordinate descent on the non-negative quadratic.
    std::vector<double> w(model.headWeights.data().begin(), model.headWeights.data().end());
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
        double change = 0.0;
        for (std::size_t r = 0; r < h; ++r) {
            const double diag = gram[r * h + r];
            if (diag <= 1e-300) {
                w[r] = 0.0;
                continue;
            }
            double g = -rhs[r];
            for (std::size_t q = 0; q < h; ++q) g += gram[r * h + q] * w[q];
            const double next = std::max(0.0, w[r] - g / diag);
            change = std::max(change, std::fabs(next - w[r]));
            w[r] = next;
        }
        if (change < 1e-13) break;
    }
    double bias = meanY;
    for (std::size_t r = 0; r < h; ++r) bias -= w[r] * meanX[r];
    model.headWeights = Tensor::vector(w);
    model.headBias = Tensor::scalar(bias);
}

EncoderPredictions predict(const EncoderModel& model, std::span<const MultiModalSample* const> samples) {
    EncoderPredictions out;
    for (const auto* s : samples) {
        const auto f = forward(*s, model);
        out.labels.push_back(eval::argmax(f.probabilities));
        out.probabilities.push_back(f.probabilities);
        if (model.config.regression) out.regression.push_back(regressionForward(f.zTime, model));
    }
    return out;
}

double rootMeanSquaredError(std::span<const double> predicted, std::span<const MultiModalSample* const> samples) {
    if (predicted.size() != samples.size() || samples.empty()) {
        throw ContractError("RMSE needs one prediction per sample");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!samples[i]->target) throw ContractError("sample " + samples[i]->id + " has no regression target");
        const double d = predicted[i] - *samples[i]->target;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(samples.size()));
}

TrainingResult trainEncoder(std::span<const MultiModalSample* const> train,
                            std::span<const MultiModalSample* const> validation, const EncoderConfig& config,
                            std::uint64_t seed, const StepObserver& observer) {
    config.validate();
    if (train.empty() || validation.empty()) throw ContractError("training needs non-empty train and validation splits");
    checkData(train, config, "training");
    checkData(validation, config, "validation");

    numerics::Rng root(seed);
    numerics::Rng initRng = root.fork(1);
    numerics::Rng protoRng = root.fork(2);
    numerics::Rng orderRng = root.fork(3);

    TrainingResult result;
    EncoderModel model = initializeModel(config, initRng);
    initializePrototypes(model, train, protoRng);
    if (config.regression) {
        double mean = 0.0;
        for (const auto* s : train) mean += *s->target;
        model.headBias = numerics::Tensor::scalar(mean / static_cast<double>(train.size()));
    }

    auto params = model.parameters();
    std::vector<const numerics::Tensor*> constParams;
    for (const auto& [name, t] : params) constParams.push_back(t);
    numerics::AdamState adam(numerics::AdamHyperparameters{config.learningRate}, constParams);

    std::vector<const MultiModalSample*> order(train.begin(), train.end());
    std::vector<std::size_t> truth;
    for (const auto* s : validation) truth.push_back(s->label);

    EncoderModel best = model;
    double bestScore = -std::numeric_limits<double>::infinity();
    std::uint64_t step = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        orderRng.shuffle(std::span<const MultiModalSample*>(order));
        EpochRecord record;
        record.epoch = epoch + 1;
        for (std::size_t start = 0; start < order.size(); start += config.batchSize) {
            const std::size_t end = std::min(order.size(), start + config.batchSize);
            const std::span<const MultiModalSample* const> batch(order.data() + start, end - start);
            const auto graph = buildObjective(model, batch);
            const auto loss = graph.breakdown();
            requireFiniteTerm(loss.ce, "cross-entropy", epoch);
            requireFiniteTerm(loss.clustering, "clustering", epoch);
            requireFiniteTerm(loss.evidencing, "evidencing", epoch);
            requireFiniteTerm(loss.diversity, "diversity", epoch);
            if (loss.regression) requireFiniteTerm(*loss.regression, "regression", epoch);
            accumulate(record.loss, loss);

            const auto grads = numerics::gradientOf(graph.trace, graph.total);
            std::vector<numerics::Tensor*> targets;
            std::vector<const numerics::Tensor*> gradPtrs;
            for (const auto& [name, t] : params) {
                const auto& gr = grads.of(name);
                numerics::requireFinite(gr, "gradient of " + name);
                targets.push_back(t);
                gradPtrs.push_back(&gr);
            }
            numerics::adamStep(targets, gradPtrs, adam);
            for (double& w : model.fusion.values()) w = std::max(w, 0.0);
            if (config.regression) {
                for (double& w : model.headWeights.values()) w = std::max(w, 0.0);
            }
            ++step;
            if (observer) observer(model, step);
        }
        if (config.projectEvery > 0 && (epoch + 1) % config.projectEvery == 0 && epoch + 1 < config.epochs) {
            projectPrototypes(model, train);
        }

        EncoderModel candidate = model;
        projectPrototypes(candidate, train);
        if (config.regression) refitRegressionHead(candidate, train);
        const auto preds = predict(candidate, validation);
        record.validationF1 = eval::macroF1(truth, preds.labels, config.classes);
        record.validationAuc = eval::aurocOvR(truth, preds.probabilities, config.classes);
        double score = record.validationF1;
        if (config.regression) {
            record.validationRmse = rootMeanSquaredError(preds.regression, validation);
            score = -*record.validationRmse;
        }
        if (score > bestScore) {
            bestScore = score;
            best = std::move(candidate);
            result.bestEpoch = epoch + 1;
        }
        result.history.push_back(record);
    }

    if (result.bestEpoch == 0) {
        projectPrototypes(best, train);
        if (config.regression) refitRegressionHead(best, train);
    }
    result.model = std::move(best);
    return result;
}

}  // namespace timexl::encoder
