#pragma once

#include <span>

#include "timexl/numerics/tensor.hpp"

namespace timexl::numerics {

enum class Activation { none, relu };

// Valid 1-D convolution. input: channels x steps, kernels: filters x channels x
// width, bias: filters. Output column j is the representation of the window
// starting at step j; there are steps - width + 1 columns.
Tensor conv1dForward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                     Activation activation = Activation::relu);

double sqDist(std::span<const double> a, std::span<const double> b);

// Max-subtracted softmax of a rank-1 tensor.
Tensor softmax(const Tensor& logits);

double logSumExp(std::span<const double> values);

}  // namespace timexl::numerics
