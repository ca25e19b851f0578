#include "timexl/numerics/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>

#include "timexl/error.hpp"

namespace timexl::numerics {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (product(shape_) != values_.size()) {
        throw ShapeError("tensor shape " + shapeString(shape_) + " does not hold " +
                         std::to_string(values_.size()) + " values");
    }
}

Tensor Tensor::scalar(double value) { return Tensor({}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
    const auto n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         shapeString(shape_));
    }
    return shape_[axis];
}

std::span<const double> Tensor::row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * shape_[1], shape_[1]);
}

std::span<double> Tensor::row(std::size_t i) {
    return std::span<double>(values_).subspan(i * shape_[1], shape_[1]);
}

double Tensor::item() const {
    if (values_.size() != 1) {
        throw ShapeError("item() on tensor of shape " + shapeString(shape_));
    }
    return values_[0];
}

bool Tensor::allFinite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) noexcept { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::identical(const Tensor& other) const noexcept {
    if (shape_ != other.shape_ || values_.size() != other.values_.size()) return false;
    return values_.empty() ||
           std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0;
}

std::string shapeString(const std::vector<std::size_t>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

void requireFinite(const Tensor& t, const std::string& what) {
    if (!t.allFinite()) throw NumericError("non-finite value in " + what);
}

}  // namespace timexl::numerics
