#pragma once

#include <functional>

#include "timexl/numerics/tensor.hpp"

namespace timexl::numerics {

// Central-difference estimate of d f / d x for every entry of `x`. `x` is
// perturbed in place and restored before returning; `evaluate` must read it.
Tensor centralDifference(const std::function<double()>& evaluate, Tensor& x, double step = 1e-4);

// Passes when |a - b| <= absTol or |a - b| / max(|a|, |b|) <= relTol.
bool gradientsAgree(double analytic, double numeric, double relTol = 1e-4, double absTol = 1e-6);

double relativeError(double a, double b);

}  // namespace timexl::numerics
