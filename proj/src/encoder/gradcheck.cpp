#include "timexl/encoder/gradcheck.hpp"

#include <algorithm>
#include <optional>

#include "timexl/encoder/objective.hpp"
#include "timexl/error.hpp"
#include "timexl/numerics/finite_difference.hpp"

namespace timexl::encoder {

using data::MultiModalSample;

namespace {

std::vector<const MultiModalSample*> pointers(const std::vector<MultiModalSample>& batch) {
    std::vector<const MultiModalSample*> out;
    for (const auto& s : batch) out.push_back(&s);
    return out;
}

std::vector<std::int64_t> signatureOf(const EncoderModel& model, const std::vector<const MultiModalSample*>& batch) {
    return buildObjective(model, batch).trace.branchSignature();
}

// Entries per parameter group, or nullopt when the draw sits on a kink.
std::optional<std::vector<GradCheckEntry>> checkProblem(GradCheckProblem& problem, std::size_t index,
                                                        const GradCheckOptions& options) {
    const auto batch = pointers(problem.batch);
    const auto graph = buildObjective(problem.model, batch);
    const auto base = graph.trace.branchSignature();
    const auto grads = numerics::gradientOf(graph.trace, graph.total);

    std::vector<GradCheckEntry> entries;
    for (auto& [name, tensor] : problem.model.parameters()) {
        GradCheckEntry e;
        e.configuration = index;
        e.parameter = name;
        const auto& analytic = grads.of(name);
        for (std::size_t i = 0; i < tensor->size(); ++i) {
            const double original = (*tensor)[i];
            (*tensor)[i] = original + options.step;
            const double up = lossTotal(batch, problem.model).total;
            const bool upSame = signatureOf(problem.model, batch) == base;
            (*tensor)[i] = original - options.step;
            const double down = lossTotal(batch, problem.model).total;
            const bool downSame = signatureOf(problem.model, batch) == base;
            (*tensor)[i] = original;
            if (!upSame || !downSame) return std::nullopt;

            const double numeric = (up - down) / (2.0 * options.step);
            ++e.checked;
            if (!numerics::gradientsAgree(analytic[i], numeric, options.relTol, options.absTol)) ++e.failed;
            if (std::fabs(analytic[i] - numeric) > options.absTol) {
                e.worstRelativeError = std::max(e.worstRelativeError, numerics::relativeError(analytic[i], numeric));
            }
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace

bool GradCheckReport::passed() const {
    if (configurations == 0) return false;
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.failed == 0; });
}

GradCheckProblem randomGradCheckProblem(numerics::Rng& rng, std::size_t index) {
    EncoderConfig cfg;
    cfg.classes = 2 + rng.below(2);
    cfg.channels = 1 + rng.below(3);
    cfg.steps = 4 + rng.below(13);
    cfg.timeKernel = 1 + rng.below(std::min<std::size_t>(cfg.steps, 5));
    cfg.timeFeatures = 2 + rng.below(3);
    cfg.embeddingDim = 3 + rng.below(4);
    cfg.textKernel = 1 + rng.below(2);
    cfg.textFeatures = 2 + rng.below(3);
    cfg.timePrototypes = 1 + rng.below(3);
    cfg.textPrototypes = 1 + rng.below(3);
    cfg.lambdaClustering = 0.1 + 0.2 * rng.uniform();
    cfg.lambdaEvidencing = 0.1 + 0.2 * rng.uniform();
    cfg.lambdaDiversity = 0.1 + 0.2 * rng.uniform();
    cfg.dMinTime = 1.0 + rng.uniform();
    cfg.dMinText = 3.0 + rng.uniform();
    cfg.regression = index % 2 == 1;
    cfg.pointwise = index % 4 == 3;
    cfg.regressionLoss = index % 8 == 5 ? RegressionLoss::mae : RegressionLoss::mse;

    GradCheckProblem p;
    p.model = initializeModel(cfg, rng);
    const std::size_t segments = cfg.textKernel + 1 + rng.below(3);
    const std::size_t n = 2 + rng.below(2);
    for (std::size_t i = 0; i < n; ++i) {
        MultiModalSample s;
        s.id = "g" + std::to_string(i);
        s.series = Tensor({cfg.channels, cfg.steps});
        for (double& v : s.series.values()) v = rng.gaussian();
        s.segments.assign(segments, "segment.");
        s.embeddings = Tensor({cfg.embeddingDim, segments});
        for (double& v : s.embeddings.values()) v = rng.gaussian();
        s.label = i % cfg.classes;
        s.target = rng.gaussian();
        p.batch.push_back(std::move(s));
    }
    // Prototypes near real representations keep similarities (and their
    // gradients) away from underflow.
    for (Modality modality : {Modality::time, Modality::text}) {
        Tensor& protos = modality == Modality::time ? p.model.timePrototypes : p.model.textPrototypes;
        for (std::size_t r = 0; r < protos.dim(0); ++r) {
            const auto& s = p.batch[rng.below(p.batch.size())];
            const Tensor z = modality == Modality::time ? encodeTime(s.series, p.model) : encodeText(s.embeddings, p.model);
            const std::size_t j = rng.below(z.dim(1));
            for (std::size_t c = 0; c < protos.dim(1); ++c) protos.at(r, c) = z.at(c, j) + 0.3 * rng.gaussian();
        }
    }
    for (double& w : p.model.fusion.values()) w = std::fabs(rng.gaussian());
    if (cfg.regression) p.model.headBias = Tensor::scalar(rng.gaussian());
    return p;
}

GradCheckReport runGradientCheck(const GradCheckOptions& options) {
    numerics::Rng rng(options.seed);
    GradCheckReport report;
    while (report.configurations < options.configurations) {
        if (report.redraws > options.maxRedraws) {
            throw NumericError("gradient check: more than " + std::to_string(options.maxRedraws) +
                               " draws straddled a non-differentiable point");
        }
        auto problem = randomGradCheckProblem(rng, report.configurations);
        auto entries = checkProblem(problem, report.configurations, options);
        if (!entries) {
            ++report.redraws;
            continue;
        }
        report.entries.insert(report.entries.end(), entries->begin(), entries->end());
        ++report.configurations;
    }
    return report;
}

nlohmann::json toJson(const GradCheckReport& report) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"configuration", e.configuration},
                           {"parameter", e.parameter},
                           {"checked", e.checked},
                           {"failed", e.failed},
                           {"worst_relative_error", e.worstRelativeError}});
    }
    return {{"configurations", report.configurations},
            {"redraws", report.redraws},
            {"passed", report.passed()},
            {"entries", entries}};
}

}  // namespace timexl::encoder
