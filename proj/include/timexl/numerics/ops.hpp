#pragma once

#include <cstddef>
#include <span>

#include "timexl/numerics/kernels.hpp"
#include "timexl/numerics/trace.hpp"

// Differentiable operations recorded on a ComputationTrace. This is exactly
// the set the prototype encoder needs; nothing more.
namespace timexl::numerics::ops {

// input: channels x steps, kernels: filters x channels x width, bias: filters.
Var conv1d(ComputationTrace& t, Var input, Var kernels, Var bias,
           Activation activation = Activation::relu);

// prototypes: m x d, reps: d x S (columns are segments) -> m x S squared distances.
Var pairwiseSqDist(ComputationTrace& t, Var prototypes, Var reps);

// Elementwise exp(-x).
Var expNeg(ComputationTrace& t, Var x);

// Row-wise max / min of a matrix; ties resolve to the smallest column index.
Var rowMax(ComputationTrace& t, Var x);
Var rowMin(ComputationTrace& t, Var x);
// Column-wise min; ties resolve to the smallest row index.
Var colMin(ComputationTrace& t, Var x);

// Flattens and joins tensors into one vector.
Var concat(ComputationTrace& t, std::span<const Var> parts);
// Joins matrices with equal row counts along the column axis.
Var hconcat(ComputationTrace& t, std::span<const Var> parts);

Var matvec(ComputationTrace& t, Var matrix, Var vec);
Var matmul(ComputationTrace& t, Var a, Var b);
Var transpose(ComputationTrace& t, Var x);

Var softmax(ComputationTrace& t, Var logits);
// Softmax down each column of a matrix.
Var columnSoftmax(ComputationTrace& t, Var x);
// -log softmax(logits)[target]
Var softmaxCrossEntropy(ComputationTrace& t, Var logits, std::size_t target);

Var meanColumns(ComputationTrace& t, Var x);
Var sum(ComputationTrace& t, Var x);
Var add(ComputationTrace& t, Var a, Var b);
Var sub(ComputationTrace& t, Var a, Var b);
Var scale(ComputationTrace& t, Var x, double factor);
Var square(ComputationTrace& t, Var x);
Var abs(ComputationTrace& t, Var x);
Var dot(ComputationTrace& t, Var a, Var b);

// Sum over ordered pairs i != j of rows of `prototypes` of
// max(0, threshold - |p_i - p_j|^2).
Var diversityHinge(ComputationTrace& t, Var prototypes, double threshold);

}  // namespace timexl::numerics::ops
