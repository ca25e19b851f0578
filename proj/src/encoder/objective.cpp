#include "timexl/encoder/objective.hpp"

#include <cmath>

#include "timexl/error.hpp"
#include "timexl/numerics/ops.hpp"

namespace timexl::encoder {

using numerics::Var;
namespace ops = numerics::ops;

LossBreakdown ObjectiveGraph::breakdown() const {
    LossBreakdown b;
    b.total = trace.value(total).item();
    b.ce = trace.value(ce).item();
    b.clustering = trace.value(clustering).item();
    b.evidencing = trace.value(evidencing).item();
    b.diversity = trace.value(diversity).item();
    if (regression) b.regression = trace.value(*regression).item();
    return b;
}

ObjectiveGraph buildObjective(const EncoderModel& model, std::span<const data::MultiModalSample* const> batch) {
    if (batch.empty()) throw ContractError("loss of an empty batch");
    const auto& cfg = model.config;
    ObjectiveGraph g;
    auto& t = g.trace;
    for (const auto& [name, tensor] : model.parameters()) g.parameters[name] = t.parameter(name, *tensor);
    const auto P = [&](const char* name) { return g.parameters.at(name); };

    std::vector<Var> distTime, distText, ceTerms, regTerms;
    for (const auto* s : batch) {
        if (!s->embedded()) throw ContractError("sample " + s->id + " has no segment embeddings");
        if (s->label >= cfg.classes) throw ContractError("sample " + s->id + " label outside the class range");
        Var zt = ops::conv1d(t, t.constant(s->series), P("time.kernels"), P("time.bias"));
        Var zs = ops::conv1d(t, t.constant(s->embeddings), P("text.kernels"), P("text.bias"));
        if (cfg.pointwise) {
            zt = ops::conv1d(t, zt, P("time.pointwise.kernels"), P("time.pointwise.bias"));
            zs = ops::conv1d(t, zs, P("text.pointwise.kernels"), P("text.pointwise.bias"));
        }
        const Var dt = ops::pairwiseSqDist(t, P("prototypes.time"), zt);
        const Var ds = ops::pairwiseSqDist(t, P("prototypes.text"), zs);
        distTime.push_back(dt);
        distText.push_back(ds);
        const Var simT = ops::expNeg(t, dt);
        const Var simS = ops::expNeg(t, ds);
        const std::vector<Var> parts = {ops::rowMax(t, simT), ops::rowMax(t, simS)};
        const Var logits = ops::matvec(t, P("fusion"), ops::concat(t, parts));
        ceTerms.push_back(ops::softmaxCrossEntropy(t, logits, s->label));

        if (cfg.regression) {
            if (!s->target) throw ContractError("sample " + s->id + " has no regression target");
            const Var weights = ops::columnSoftmax(t, simT);
            const Var recon = ops::matmul(t, ops::transpose(t, P("prototypes.time")), weights);
            const Var out = ops::add(t, ops::dot(t, P("head.weights"), ops::meanColumns(t, recon)), P("head.bias"));
            g.regressionOutputs.push_back(out);
            const Var residual = ops::sub(t, out, t.constant(numerics::Tensor::scalar(*s->target)));
            regTerms.push_back(cfg.regressionLoss == RegressionLoss::mse ? ops::square(t, residual)
                                                                         : ops::abs(t, residual));
        }
    }

    const auto addAll = [&](const std::vector<Var>& xs) {
        Var acc = xs.front();
        for (std::size_t i = 1; i < xs.size(); ++i) acc = ops::add(t, acc, xs[i]);
        return acc;
    };

    g.ce = addAll(ceTerms);
    const Var allTime = ops::hconcat(t, distTime);
    const Var allText = ops::hconcat(t, distText);
    g.clustering = ops::add(t, ops::sum(t, ops::colMin(t, allTime)), ops::sum(t, ops::colMin(t, allText)));
    g.evidencing = ops::add(t, ops::sum(t, ops::rowMin(t, allTime)), ops::sum(t, ops::rowMin(t, allText)));
    g.diversity = ops::add(t, ops::diversityHinge(t, P("prototypes.time"), cfg.dMinTime),
                           ops::diversityHinge(t, P("prototypes.text"), cfg.dMinText));

    Var total = ops::add(t, g.ce, ops::scale(t, g.clustering, cfg.lambdaClustering));
    total = ops::add(t, total, ops::scale(t, g.evidencing, cfg.lambdaEvidencing));
    total = ops::add(t, total, ops::scale(t, g.diversity, cfg.lambdaDiversity));
    if (cfg.regression) {
        g.regression = ops::scale(t, addAll(regTerms), 1.0 / static_cast<double>(regTerms.size()));
        total = ops::add(t, total, *g.regression);
    }
    g.total = total;
    return g;
}

double regressionLoss(std::span<const data::MultiModalSample* const> batch, const EncoderModel& model) {
    if (batch.empty()) throw ContractError("loss of an empty batch");
    double acc = 0.0;
    for (const auto* s : batch) {
        if (!s->target) throw ContractError("sample " + s->id + " has no regression target");
        const double d = regressionForward(encodeTime(s->series, model), model) - *s->target;
        acc += model.config.regressionLoss == RegressionLoss::mse ? d * d : std::fabs(d);
    }
    return acc / static_cast<double>(batch.size());
}

LossBreakdown lossTotal(std::span<const data::MultiModalSample* const> batch, const EncoderModel& model) {
    return buildObjective(model, batch).breakdown();
}

}  // namespace timexl::encoder
