#include "timexl/numerics/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "timexl/error.hpp"

namespace timexl::numerics {

Tensor conv1dForward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                     Activation activation) {
    if (input.rank() != 2) throw ShapeError("conv1d input must be channels x steps, got " + shapeString(input.shape()));
    if (kernels.rank() != 3) throw ShapeError("conv1d kernels must be filters x channels x width, got " + shapeString(kernels.shape()));
    const std::size_t channels = input.dim(0);
    const std::size_t steps = input.dim(1);
    const std::size_t filters = kernels.dim(0);
    const std::size_t width = kernels.dim(2);
    if (kernels.dim(1) != channels) {
        throw ShapeError("conv1d kernel channel count " + std::to_string(kernels.dim(1)) +
                         " does not match input channel count " + std::to_string(channels));
    }
    if (bias.rank() != 1 || bias.dim(0) != filters) {
        throw ShapeError("conv1d bias must have " + std::to_string(filters) + " entries");
    }
    if (width == 0 || width > steps) {
        throw InvalidConfigError("conv1d kernel width " + std::to_string(width) +
                                 " invalid for input length " + std::to_string(steps));
    }
    requireFinite(input, "conv1d input");

    const std::size_t segments = steps - width + 1;
    Tensor out({filters, segments});
    for (std::size_t o = 0; o < filters; ++o) {
        for (std::size_t j = 0; j < segments; ++j) {
            double acc = bias[o];
            for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t u = 0; u < width; ++u) {
                    acc += kernels.at(o, c, u) * input.at(c, j + u);
                }
            }
            out.at(o, j) = activation == Activation::relu ? std::max(acc, 0.0) : acc;
        }
    }
    return out;
}

double sqDist(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("sqDist length mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double logSumExp(std::span<const double> values) {
    if (values.empty()) throw ShapeError("logSumExp of empty input");
    const double m = *std::max_element(values.begin(), values.end());
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - m);
    return m + std::log(acc);
}

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 1 || logits.size() == 0) {
        throw ShapeError("softmax expects a non-empty vector, got " + shapeString(logits.shape()));
    }
    requireFinite(logits, "softmax input");
    const auto v = logits.values();
    const double m = *std::max_element(v.begin(), v.end());
    Tensor out(logits.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        total += out[i];
    }
    for (double& x : out.values()) x /= total;
    return out;
}

}  // namespace timexl::numerics
