#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "timexl/numerics/tensor.hpp"

namespace timexl::numerics {

class Gradients;
class ComputationTrace;
Gradients gradientOf(const ComputationTrace& trace, struct Var output);

// Handle to a node of a ComputationTrace.
struct Var {
    std::size_t index = 0;
};

// Ordered record of primitive tensor operations. Leaves are parameters
// (differentiable) or constants; every other node stores the forward and
// backward rules that produced it, so the trace can be replayed and
// differentiated in reverse.
//
// Operations with piecewise behaviour (relu, max, min, hinge, abs) append the
// branch they took to the node's branch list. Two evaluations with equal
// branch signatures lie on the same smooth piece of the function.
class ComputationTrace {
public:
    using Inputs = std::span<const Tensor* const>;
    using ForwardFn = std::function<Tensor(Inputs, std::vector<std::int64_t>& branches)>;
    // Accumulates into gradInputs[k]; entries are null for inputs that do not
    // need a gradient.
    using BackwardFn = std::function<void(Inputs inputs, const Tensor& output,
                                          const Tensor& gradOutput,
                                          std::span<Tensor* const> gradInputs)>;

    Var parameter(std::string name, Tensor value);
    Var constant(Tensor value);
    Var apply(std::string_view op, std::vector<Var> inputs, ForwardFn forward,
              BackwardFn backward);

    const Tensor& value(Var v) const { return nodes_.at(v.index).value; }
    const std::string& name(Var v) const { return nodes_.at(v.index).name; }
    std::string_view op(Var v) const { return nodes_.at(v.index).op; }
    bool isParameter(Var v) const { return nodes_.at(v.index).kind == Kind::parameter; }
    bool requiresGrad(Var v) const { return nodes_.at(v.index).requiresGrad; }

    std::size_t size() const noexcept { return nodes_.size(); }
    const std::vector<Var>& parameters() const noexcept { return parameters_; }

    // Concatenated branch decisions of every recorded operation.
    std::vector<std::int64_t> branchSignature() const;

    // Re-executes every operation from the leaves and reports whether each
    // recomputed output is bitwise identical to the recorded one.
    bool replayMatches() const;

private:
    friend class Gradients;
    friend Gradients gradientOf(const ComputationTrace& trace, Var output);

    enum class Kind { parameter, constant, operation };

    struct Node {
        Kind kind = Kind::constant;
        std::string_view op;
        std::string name;
        std::vector<std::size_t> inputs;
        Tensor value;
        ForwardFn forward;
        BackwardFn backward;
        std::vector<std::int64_t> branches;
        bool requiresGrad = false;
    };

    std::vector<Node> nodes_;
    std::vector<Var> parameters_;
};

// d(output)/d(parameter) for every parameter leaf of a trace.
class Gradients {
public:
    const Tensor& of(Var parameter) const;
    const Tensor& of(const std::string& name) const;
    bool contains(const std::string& name) const { return byName_.count(name) != 0; }
    const std::vector<std::string>& names() const noexcept { return order_; }

private:
    friend Gradients gradientOf(const ComputationTrace& trace, Var output);

    std::unordered_map<std::size_t, Tensor> byIndex_;
    std::unordered_map<std::string, std::size_t> byName_;
    std::vector<std::string> order_;
};

// Reverse-mode accumulation from a scalar node. Throws ContractError when
// `output` is not a scalar.
Gradients gradientOf(const ComputationTrace& trace, Var output);

}  // namespace timexl::numerics
