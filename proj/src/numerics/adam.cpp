#include "timexl/numerics/adam.hpp"

#include <cmath>

#include "timexl/error.hpp"

namespace timexl::numerics {

AdamState::AdamState(AdamHyperparameters hyper, std::span<const Tensor* const> params)
    : hyper_(hyper) {
    first_.reserve(params.size());
    second_.reserve(params.size());
    for (const Tensor* p : params) {
        first_.emplace_back(p->shape(), 0.0);
        second_.emplace_back(p->shape(), 0.0);
    }
}

void adamStep(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
              AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_.size()) {
        throw ShapeError("adamStep: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " +
                         std::to_string(state.first_.size()) + " moment slots");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k]->shape() != grads[k]->shape() || params[k]->shape() != state.first_[k].shape()) {
            throw ShapeError("adamStep: shape mismatch for parameter " + std::to_string(k) + ": " +
                             shapeString(params[k]->shape()) + " vs gradient " +
                             shapeString(grads[k]->shape()));
        }
    }

    const auto& h = state.hyper_;
    state.step_ += 1;
    const double t = static_cast<double>(state.step_);
    const double correction1 = 1.0 - std::pow(h.beta1, t);
    const double correction2 = 1.0 - std::pow(h.beta2, t);

    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        Tensor& m = state.first_[k];
        Tensor& v = state.second_[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
            const double mHat = m[i] / correction1;
            const double vHat = v[i] / correction2;
            p[i] -= h.learningRate * mHat / (std::sqrt(vHat) + h.epsilon);
        }
    }
}

}  // namespace timexl::numerics
