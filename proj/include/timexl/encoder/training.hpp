#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "timexl/encoder/model.hpp"
#include "timexl/encoder/objective.hpp"
#include "timexl/eval/metrics.hpp"

namespace timexl::encoder {

struct EpochRecord {
    std::size_t epoch = 0;
    LossBreakdown loss;         // summed over the epoch's batches
    double validationF1 = 0.0;
    double validationAuc = 0.0;
    std::optional<double> validationRmse;
};

struct TrainingResult {
    EncoderModel model;
    std::vector<EpochRecord> history;
    std::size_t bestEpoch = 0;  // 0 when no epoch ran
};

struct EncoderPredictions {
    std::vector<std::size_t> labels;
    std::vector<std::vector<double>> probabilities;
    std::vector<double> regression;  // filled when the head is enabled
};

EncoderPredictions predict(const EncoderModel& model, std::span<const data::MultiModalSample* const> samples);

double rootMeanSquaredError(std::span<const double> predicted, std::span<const data::MultiModalSample* const> samples);

// Mean over segments of the prototype reconstruction the regression head reads.
std::vector<double> pooledReconstruction(const Tensor& zTime, const EncoderModel& model);

// Least-squares fit of the regression head (weights kept non-negative) on the
// training split with every other parameter frozen. Run after projection,
// which moves the prototypes the head reads from.
void refitRegressionHead(EncoderModel& model, std::span<const data::MultiModalSample* const> train,
                         std::size_t sweeps = 20000);

// Called after every optimizer step; tests use it to observe invariants.
using StepObserver = std::function<void(const EncoderModel&, std::uint64_t step)>;

// Mini-batch Adam on the full objective. After every epoch a projected copy
// of the model is scored on the validation split; the copy with the best
// macro-F1 (lowest RMSE when the regression head is enabled) is returned.
// Earlier epochs win ties.
TrainingResult trainEncoder(std::span<const data::MultiModalSample* const> train,
                            std::span<const data::MultiModalSample* const> validation,
                            const EncoderConfig& config, std::uint64_t seed,
                            const StepObserver& observer = {});

}  // namespace timexl::encoder
