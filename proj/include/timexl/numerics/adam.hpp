#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "timexl/numerics/tensor.hpp"

namespace timexl::numerics {

struct AdamHyperparameters {
    double learningRate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class AdamState {
public:
    AdamState() = default;
    AdamState(AdamHyperparameters hyper, std::span<const Tensor* const> params);

    const AdamHyperparameters& hyper() const noexcept { return hyper_; }
    std::uint64_t step() const noexcept { return step_; }
    const std::vector<Tensor>& firstMoments() const noexcept { return first_; }
    const std::vector<Tensor>& secondMoments() const noexcept { return second_; }

private:
    friend void adamStep(std::span<Tensor* const>, std::span<const Tensor* const>, AdamState&);

    AdamHyperparameters hyper_;
    std::uint64_t step_ = 0;
    std::vector<Tensor> first_;
    std::vector<Tensor> second_;
};

// One bias-corrected Adam update applied in place:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adamStep(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
              AdamState& state);

}  // namespace timexl::numerics
