#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "timexl/encoder/model.hpp"

namespace timexl::encoder {

struct GradCheckOptions {
    std::size_t configurations = 20;
    std::uint64_t seed = 2024;
    double step = 1e-4;
    double relTol = 1e-4;
    double absTol = 1e-6;
    std::size_t maxRedraws = 500;
};

struct GradCheckEntry {
    std::size_t configuration = 0;
    std::string parameter;
    std::size_t checked = 0;
    std::size_t failed = 0;
    double worstRelativeError = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    std::size_t configurations = 0;
    std::size_t redraws = 0;  // configurations discarded because a perturbation crossed a kink
    bool passed() const;
};

// Random small problem: C in {2,3}, N <= 3, T <= 16, k, k' <= 3, a batch of
// 2-3 samples. Odd draws enable the regression head and the pointwise layer
// alternately, so every parameter group is exercised.
struct GradCheckProblem {
    EncoderModel model;
    std::vector<data::MultiModalSample> batch;
};

GradCheckProblem randomGradCheckProblem(numerics::Rng& rng, std::size_t index);

// Compares every parameter-group gradient of the full objective with central
// finite differences. A draw where any perturbation changes the trace's branch
// signature (a relu, min/max, hinge or abs switching branch) is discarded and
// redrawn, because the loss is not differentiable across that point.
GradCheckReport runGradientCheck(const GradCheckOptions& options);

nlohmann::json toJson(const GradCheckReport& report);

}  // namespace timexl::encoder
