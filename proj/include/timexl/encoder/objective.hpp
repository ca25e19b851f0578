#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>

#include "timexl/encoder/model.hpp"
#include "timexl/numerics/trace.hpp"

namespace timexl::encoder {

struct LossBreakdown {
    double total = 0.0;
    double ce = 0.0;
    double clustering = 0.0;
    double evidencing = 0.0;
    double diversity = 0.0;
    std::optional<double> regression;
};

// The training objective of one batch recorded on a computation trace. Every
// model parameter is a named leaf, so gradientOf(trace, total) yields the
// gradient of each parameter group.
struct ObjectiveGraph {
    numerics::ComputationTrace trace;
    std::map<std::string, numerics::Var> parameters;
    numerics::Var total, ce, clustering, evidencing, diversity;
    std::optional<numerics::Var> regression;
    std::vector<numerics::Var> regressionOutputs;  // one per sample

    LossBreakdown breakdown() const;
};

// ce: categorical cross-entropy summed over the batch.
// clustering: sum over every segment representation of the squared distance
//   to its nearest same-modality prototype.
// evidencing: sum over prototypes of the squared distance to the nearest
//   segment representation in the batch.
// diversity: per modality, sum over ordered prototype pairs of
//   max(0, d_min - |p_i - p_j|^2).
// regression (when enabled): mean squared (or absolute) error of the head.
ObjectiveGraph buildObjective(const EncoderModel& model, std::span<const data::MultiModalSample* const> batch);

// Mean squared (or absolute, per config) error of regressionForward against
// the batch targets.
double regressionLoss(std::span<const data::MultiModalSample* const> batch, const EncoderModel& model);

LossBreakdown lossTotal(std::span<const data::MultiModalSample* const> batch, const EncoderModel& model);

}  // namespace timexl::encoder
