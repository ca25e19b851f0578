#include "timexl/numerics/trace.hpp"

#include "timexl/error.hpp"

namespace timexl::numerics {

Var ComputationTrace::parameter(std::string name, Tensor value) {
    Node node;
    node.kind = Kind::parameter;
    node.op = "parameter";
    node.name = std::move(name);
    node.value = std::move(value);
    node.requiresGrad = true;
    nodes_.push_back(std::move(node));
    const Var v{nodes_.size() - 1};
    parameters_.push_back(v);
    return v;
}

Var ComputationTrace::constant(Tensor value) {
    Node node;
    node.kind = Kind::constant;
    node.op = "constant";
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

Var ComputationTrace::apply(std::string_view op, std::vector<Var> inputs, ForwardFn forward,
                            BackwardFn backward) {
    Node node;
    node.kind = Kind::operation;
    node.op = op;
    node.inputs.reserve(inputs.size());
    std::vector<const Tensor*> values;
    values.reserve(inputs.size());
    for (Var in : inputs) {
        if (in.index >= nodes_.size()) throw ContractError("trace input refers to a future node");
        node.inputs.push_back(in.index);
        values.push_back(&nodes_[in.index].value);
        node.requiresGrad = node.requiresGrad || nodes_[in.index].requiresGrad;
    }
    node.value = forward(values, node.branches);
    node.forward = std::move(forward);
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

std::vector<std::int64_t> ComputationTrace::branchSignature() const {
    std::vector<std::int64_t> out;
    for (const Node& n : nodes_) {
        out.push_back(static_cast<std::int64_t>(n.branches.size()));
        out.insert(out.end(), n.branches.begin(), n.branches.end());
    }
    return out;
}

bool ComputationTrace::replayMatches() const {
    std::vector<Tensor> replayed(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.kind != Kind::operation) {
            replayed[i] = n.value;
            continue;
        }
        std::vector<const Tensor*> values;
        for (std::size_t in : n.inputs) values.push_back(&replayed[in]);
        std::vector<std::int64_t> branches;
        replayed[i] = n.forward(values, branches);
        if (!replayed[i].identical(n.value) || branches != n.branches) return false;
    }
    return true;
}

const Tensor& Gradients::of(Var parameter) const {
    auto it = byIndex_.find(parameter.index);
    if (it == byIndex_.end()) throw ContractError("no gradient for trace node " + std::to_string(parameter.index));
    return it->second;
}

const Tensor& Gradients::of(const std::string& name) const {
    auto it = byName_.find(name);
    if (it == byName_.end()) throw ContractError("no gradient for parameter '" + name + "'");
    return byIndex_.at(it->second);
}

Gradients gradientOf(const ComputationTrace& trace, Var output) {
    const auto& nodes = trace.nodes_;
    if (output.index >= nodes.size()) throw ContractError("gradientOf: output is not a node of the trace");
    if (nodes[output.index].value.size() != 1) {
        throw ContractError("gradientOf: target must be a scalar, got shape " +
                            shapeString(nodes[output.index].value.shape()));
    }

    std::vector<Tensor> grads(nodes.size());
    grads[output.index] = Tensor(nodes[output.index].value.shape(), 1.0);

    for (std::size_t i = output.index + 1; i-- > 0;) {
        const auto& node = nodes[i];
        if (node.kind != ComputationTrace::Kind::operation || !node.requiresGrad) continue;
        if (grads[i].size() == 0 && grads[i].shape().empty()) continue;  // not reached

        std::vector<const Tensor*> inputs;
        std::vector<Tensor*> gradInputs;
        inputs.reserve(node.inputs.size());
        gradInputs.reserve(node.inputs.size());
        for (std::size_t in : node.inputs) {
            inputs.push_back(&nodes[in].value);
            if (nodes[in].requiresGrad) {
                if (grads[in].size() == 0 && grads[in].shape().empty()) {
                    grads[in] = Tensor(nodes[in].value.shape(), 0.0);
                }
                gradInputs.push_back(&grads[in]);
            } else {
                gradInputs.push_back(nullptr);
            }
        }
        node.backward(inputs, node.value, grads[i], gradInputs);
    }

    Gradients out;
    for (Var p : trace.parameters_) {
        Tensor g = grads[p.index];
        if (g.size() == 0 && g.shape().empty()) g = Tensor(nodes[p.index].value.shape(), 0.0);
        out.byIndex_.emplace(p.index, std::move(g));
        out.byName_.emplace(nodes[p.index].name, p.index);
        out.order_.push_back(nodes[p.index].name);
    }
    return out;
}

}  // namespace timexl::numerics
