// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "oracles.hpp"
#include "timexl/agents/scripted.hpp"
#include "timexl/data/synthetic.hpp"
#include "timexl/encoder/gradcheck.hpp"
#include "timexl/encoder/objective.hpp"
#include "timexl/encoder/training.hpp"
#include "timexl/error.hpp"
#include "timexl/eval/metrics.hpp"
#include "timexl/numerics/finite_difference.hpp"
#include "timexl/numerics/rng.hpp"
#include "timexl/pipeline/checkpoint.hpp"
#include "timexl/pipeline/loop.hpp"

using namespace timexl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream out;
    out.precision(digits);
    out << std::fixed << v;
    return out.str();
}

double seconds(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::vector<const data::MultiModalSample*> ptrs(const std::vector<data::MultiModalSample>& v) {
    std::vector<const data::MultiModalSample*> out;
    for (const auto& s : v) out.push_back(&s);
    return out;
}

std::vector<std::size_t> labelsOf(const std::vector<const data::MultiModalSample*>& v) {
    std::vector<std::size_t> out;
    for (const auto* s : v) out.push_back(s->label);
    return out;
}

// Split, normalize and embed with the offline hashing embedder.
data::Dataset preparedSynthetic(const data::SyntheticSpec& spec, std::size_t embeddingDim) {
    data::HashingEmbedder embedder(embeddingDim);
    data::EmbeddingCache cache;
    return pipeline::prepareDataset(data::synthesizeDataset(spec), spec.seed, embedder, cache);
}

const std::vector<std::string> kNoiseTokens = {"lorem", "ipsum", "zzz", "glitch", "static", "qwerty", "blah", "xyzzy"};

json reflectionRules() {
    return json::array({{{"template", "reflection-generate"},
                         {"text", "## class0\nIndicator words decide the label.\n## class1\nIndicator words decide the label."}},
                        {{"template", "reflection-update"}, {"text", "## class0\nFiller words mislead.\n## class1\nFiller words mislead."}},
                        {{"template", "reflection-summarize"},
                         {"text", "Delete filler tokens and trust the archive reference over a conflicting indicator."}}});
}

// Reads indicator tokens in the text; removes noise tokens and restores
// corrupted indicators from the archive cue with probability 0.8.
json improvingScript() {
    json rules = json::array();
    rules.push_back({{"template", "prediction"}, {"action", "vote"}, {"block", "text"}, {"fallback", "guess"}});
    rules.push_back({{"template", "prediction-text-only"}, {"action", "vote"}, {"block", "text"}, {"fallback", "guess"}});
    for (const auto& r : reflectionRules()) rules.push_back(r);
    rules.push_back({{"template", "refinement"},
                     {"action", "refine"},
                     {"drop_tokens", kNoiseTokens},
                     {"restore", {{"cue_prefix", "cue-"}, {"indicator_prefix", "hint-"}, {"probability", 0.8}}}});
    return {{"model", "scripted-improver"}, {"rules", rules}};
}

// Names the label opposite to the archive cue, so it is wrong on every sample.
json alwaysWrongScript() {
    json rules = json::array();
    for (const char* t : {"prediction", "prediction-text-only"}) {
        rules.push_back({{"template", t}, {"action", "vote"}, {"block", "text"}, {"prefix", "cue-"}, {"invert", true},
                         {"fallback", "abstain"}});
    }
    for (const auto& r : reflectionRules()) rules.push_back(r);
    rules.push_back({{"template", "refinement"}, {"action", "echo"}});
    return {{"model", "scripted-wrong"}, {"rules", rules}};
}

// Answers from the indicator tokens of the matched input segments listed in
// the explanations; guesses when there is nothing to read.
json explanationReaderScript() {
    json rules = json::array();
    rules.push_back({{"template", "prediction"},
                     {"action", "vote"},
                     {"block", "explanations"},
                     {"extract", "<-> \"([^\"]*)\""},
                     {"fallback", "guess"}});
    rules.push_back({{"template", "prediction-text-only"}, {"action", "guess"}});
    return {{"model", "scripted-reader"}, {"rules", rules}};
}

struct Agents {
    explicit Agents(const json& script, std::vector<std::string> labels) : client(script) {
        ctx.client = &client;
        ctx.ledger = &ledger;
        ctx.options.labels = std::move(labels);
        ctx.options.backoffSeconds = 0.0;
    }
    agents::ScriptedClient client;
    agents::UsageLedger ledger;
    agents::AgentContext ctx;
};

// -- shared trained models ---------------------------------------------------

struct PlantedRun {
    data::Dataset dataset;
    encoder::TrainingResult result;
    double seconds = 0.0;
};

const PlantedRun& plantedRun() {
    static const PlantedRun run = [] {
        data::SyntheticSpec spec;
        spec.classes = 2;
        spec.samples = 600;
        spec.motifAmplitude = 2.0;
        spec.noiseTokenRate = 0.2;
        spec.seed = 7;
        PlantedRun r;
        r.dataset = preparedSynthetic(spec, 64);
        encoder::EncoderConfig cfg;
        cfg.channels = r.dataset.manifest.channels;
        cfg.steps = r.dataset.manifest.steps;
        cfg.epochs = 200;
        const auto start = std::chrono::steady_clock::now();
        r.result = encoder::trainEncoder(data::selectSplit(r.dataset.samples, data::Split::train),
                                         data::selectSplit(r.dataset.samples, data::Split::validation), cfg, spec.seed);
        r.seconds = seconds(start);
        return r;
    }();
    return run;
}

data::SyntheticSpec loopSpec() {
    data::SyntheticSpec spec;
    spec.samples = 600;
    spec.seed = 7;
    spec.motifAmplitude = 0.2;
    spec.noiseTokenRate = 0.2;
    spec.hintCorruptionRate = 0.3;
    spec.latentCue = true;
    return spec;
}

pipeline::LoopConfig loopConfig(const data::DatasetManifest& manifest) {
    pipeline::LoopConfig c;
    c.encoder.channels = manifest.channels;
    c.encoder.steps = manifest.steps;
    c.encoder.epochs = 60;
    c.agents.labels = manifest.labelNames;
    c.agents.backoffSeconds = 0.0;
    c.iterations = 3;
    c.omega = 3;
    return c;
}

struct LoopRun {
    data::Dataset dataset;
    pipeline::LoopConfig config;
    pipeline::LoopState state;
    double seconds = 0.0;
};

LoopRun runScriptedLoop(const json& script, std::size_t iterations) {
    LoopRun run;
    data::HashingEmbedder embedder(64);
    data::EmbeddingCache cache;
    run.dataset = pipeline::prepareDataset(data::synthesizeDataset(loopSpec()), 7, embedder, cache);
    run.config = loopConfig(run.dataset.manifest);
    run.config.iterations = iterations;
    Agents a(script, run.dataset.manifest.labelNames);
    pipeline::LoopContext ctx{a.ctx, run.dataset.manifest, &embedder, &cache};
    const auto start = std::chrono::steady_clock::now();
    run.state = pipeline::runLoop(run.dataset, ctx, run.config);
    run.seconds = seconds(start);
    return run;
}

const LoopRun& improvingLoop() {
    static const LoopRun run = runScriptedLoop(improvingScript(), 3);
    return run;
}

// -- criteria -------------------------------------------------------------

Outcome gradientCorrectness() {
    const auto start = std::chrono::steady_clock::now();
    encoder::GradCheckOptions options;
    options.configurations = 20;
    options.relTol = 1e-4;
    const auto report = encoder::runGradientCheck(options);
    const double elapsed = seconds(start);
    std::size_t checked = 0, failed = 0;
    double worst = 0.0;
    for (const auto& e : report.entries) {
        checked += e.checked;
        failed += e.failed;
        worst = std::max(worst, e.worstRelativeError);
    }
    const bool pass = report.passed() && report.configurations == 20 && elapsed < 60.0;
    return {pass, std::to_string(report.configurations) + " configurations, " + std::to_string(checked) +
                      " entries, " + std::to_string(failed) + " failed, worst relative error " +
                      fmt(worst, 8) + ", " + fmt(elapsed, 1) + "s"};
}

Outcome lossOracles() {
    numerics::Rng rng(42);
    double worst = 0.0;
    for (std::size_t trial = 0; trial < 50; ++trial) {
        auto problem = encoder::randomGradCheckProblem(rng, trial);
        const auto batch = ptrs(problem.batch);
        const auto& m = problem.model;
        const auto loss = encoder::lossTotal(batch, m);
        std::vector<numerics::Tensor> zt, zs;
        for (const auto* s : batch) {
            zt.push_back(encoder::encodeTime(s->series, m));
            zs.push_back(encoder::encodeText(s->embeddings, m));
        }
        worst = std::max(worst, std::fabs(loss.clustering - (oracle::clusteringOracle(zt, m.timePrototypes) +
                                                              oracle::clusteringOracle(zs, m.textPrototypes))));
        worst = std::max(worst, std::fabs(loss.evidencing - (oracle::evidencingOracle(zt, m.timePrototypes) +
                                                              oracle::evidencingOracle(zs, m.textPrototypes))));
        worst = std::max(worst, std::fabs(loss.diversity - (oracle::diversityOracle(m.timePrototypes, m.config.dMinTime) +
                                                             oracle::diversityOracle(m.textPrototypes, m.config.dMinText))));
    }
    return {worst <= 1e-9, "50 instances, largest deviation " + fmt(worst, 12)};
}

Outcome projectionContract() {
    const auto& run = plantedRun();
    const auto train = data::selectSplit(run.dataset.samples, data::Split::train);
    numerics::Rng rng(3);
    auto model = encoder::initializeModel(run.result.model.config, rng);
    for (double& v : model.timePrototypes.values()) v = rng.gaussian();
    for (double& v : model.textPrototypes.values()) v = rng.gaussian();
    encoder::projectPrototypes(model, train);

    std::size_t mismatches = 0, rows = 0;
    for (auto modality : {encoder::Modality::time, encoder::Modality::text}) {
        const bool time = modality == encoder::Modality::time;
        const auto& protos = time ? model.timePrototypes : model.textPrototypes;
        const auto& prov = time ? model.timeProvenance : model.textProvenance;
        for (std::size_t r = 0; r < protos.dim(0); ++r, ++rows) {
            const auto* src = *std::find_if(train.begin(), train.end(), [&](const auto* s) { return s->id == prov[r].sampleId; });
            const auto z = time ? encoder::encodeTime(src->series, model) : encoder::encodeText(src->embeddings, model);
            bool same = src->label == model.prototypeClass(modality, r);
            for (std::size_t d = 0; d < protos.dim(1); ++d) same = same && protos.at(r, d) == z.at(d, prov[r].segment);
            mismatches += !same;
        }
    }
    auto again = model;
    encoder::projectPrototypes(again, train);
    const bool idempotent = again.timePrototypes.identical(model.timePrototypes) &&
                            again.textPrototypes.identical(model.textPrototypes);
    auto trained = run.result.model;
    encoder::projectPrototypes(trained, train);
    const bool trainedIdempotent = trained.timePrototypes.identical(run.result.model.timePrototypes) &&
                                   trained.textPrototypes.identical(run.result.model.textPrototypes);
    return {mismatches == 0 && idempotent && trainedIdempotent,
            std::to_string(rows) + " prototypes, " + std::to_string(mismatches) + " not bit-equal to a same-class segment, idempotent " +
                (idempotent && trainedIdempotent ? "yes" : "no")};
}

Outcome syntheticLearning() {
    const auto& run = plantedRun();
    const auto& history = run.result.history;
    std::optional<std::size_t> first;
    for (const auto& e : history) {
        if (!first && e.validationF1 >= 0.9) first = e.epoch;
    }
    const auto val = data::selectSplit(run.dataset.samples, data::Split::validation);
    const double f1 = eval::macroF1(labelsOf(val), encoder::predict(run.result.model, val).labels, 2);
    const bool pass = f1 >= 0.9 && history.size() <= 200 && run.seconds < 300.0;
    return {pass, "validation macro-F1 " + fmt(f1) + " (first >= 0.90 at epoch " +
                      (first ? std::to_string(*first) : std::string("none")) + "), " + fmt(run.seconds, 1) + "s"};
}

Outcome explanationConsistency() {
    const auto& run = plantedRun();
    const auto val = data::selectSplit(run.dataset.samples, data::Split::validation);
    std::size_t agree = 0;
    for (const auto* s : val) {
        const auto e = encoder::explain(*s, run.result.model, 1, encoder::Modality::time);
        agree += !e.items.empty() && e.items.front().classIndex == s->label;
    }
    const double rate = static_cast<double>(agree) / static_cast<double>(val.size());
    return {rate >= 0.9, "top-1 time prototype class equals the label on " + std::to_string(agree) + "/" +
                             std::to_string(val.size()) + " = " + fmt(rate)};
}

Outcome loopImprovement() {
    const auto& run = improvingLoop();
    const auto& h = run.state.history;
    if (!run.state.best || h.empty()) return {false, "loop produced no best state"};
    const auto& first = h.front();
    const auto& best = h.at(run.state.best->iteration);
    bool monotone = true;
    for (std::size_t i = 1; i < h.size(); ++i) monotone = monotone && h[i].bestFusedF1 >= h[i - 1].bestFusedF1;
    const double dq = best.textQuality - first.textQuality;
    const double df = best.fused.macroF1 - first.fused.macroF1;
    const bool pass = dq >= 0.05 && df >= 0.05 && monotone && run.seconds < 600.0;
    return {pass, std::to_string(h.size()) + " iterations, best " + std::to_string(best.iteration) +
                      ": text quality " + fmt(first.textQuality) + " -> " + fmt(best.textQuality) + ", fused F1 " +
                      fmt(first.fused.macroF1) + " -> " + fmt(best.fused.macroF1) + ", best-F1 history " +
                      (monotone ? "non-decreasing" : "DECREASES") + ", " + fmt(run.seconds, 1) + "s"};
}

Outcome prototypeContext() {
    const auto& run = plantedRun();
    const auto val = data::selectSplit(run.dataset.samples, data::Split::validation);
    Agents a(explanationReaderScript(), run.dataset.manifest.labelNames);
    std::size_t withContext = 0, textOnly = 0;
    for (const auto* s : val) {
        const auto e = encoder::explain(*s, run.result.model, 3, encoder::Modality::text);
        const auto lines = pipeline::explanationLines(e, run.dataset.manifest.labelNames);
        const auto p = agents::predictWithLLM(a.ctx, s->segments, lines);
        const auto q = agents::predictWithLLM(a.ctx, s->segments, {});
        withContext += p.label && *p.label == s->label;
        textOnly += q.label && *q.label == s->label;
    }
    const double n = static_cast<double>(val.size());
    const double gain = (withContext - static_cast<double>(textOnly)) / n;
    return {gain >= 0.05, "accuracy with 3 prototype explanations " + fmt(withContext / n) + ", text only " +
                              fmt(textOnly / n) + ", gain " + fmt(gain)};
}

Outcome fusionBoundaries() {
    const auto& run = improvingLoop();
    const auto& best = *run.state.best;
    const auto val = data::selectSplit(run.state.samples, data::Split::validation);
    Agents a(improvingScript(), run.dataset.manifest.labelNames);
    const auto enc = encoder::predict(best.model, val);
    std::size_t checked = 0, violations = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        const auto e = encoder::explain(*val[i], best.model, run.config.omega, run.config.explanationModality);
        const auto llm = agents::predictWithLLM(a.ctx, val[i]->segments,
                                                pipeline::explanationLines(e, run.dataset.manifest.labelNames));
        const auto& p = enc.probabilities[i];
        violations += eval::argmax(pipeline::fusePredictions(p, llm, 1.0)) != eval::argmax(p);
        if (llm.status == agents::ParseStatus::ok) {
            ++checked;
            violations += eval::argmax(pipeline::fusePredictions(p, llm, 0.0)) != *llm.label;
        }
    }

    const auto wrong = runScriptedLoop(alwaysWrongScript(), 1);
    const auto& report = wrong.state.history.at(0);
    const bool pass = violations == 0 && checked > 0 && report.alpha == 1.0 && report.llm.macroF1 == 0.0;
    return {pass, std::to_string(val.size()) + " samples, " + std::to_string(violations) +
                      " boundary violations; always-wrong LLM (F1 " + fmt(report.llm.macroF1) + ") selects alpha " +
                      fmt(report.alpha, 1)};
}

Outcome metricOracles() {
    numerics::Rng rng(2025);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t classes = 2 + static_cast<std::size_t>(trial % 3);
        std::vector<std::size_t> truth(50);
        std::vector<std::vector<double>> scores(50, std::vector<double>(classes));
        for (std::size_t i = 0; i < 50; ++i) {
            truth[i] = rng.below(classes);
            double total = 0.0;
            for (auto& s : scores[i]) total += s = static_cast<double>(rng.below(10)) + 0.5;
            for (auto& s : scores[i]) s /= total;
        }
        worst = std::max(worst, std::fabs(eval::aurocOvR(truth, scores, classes) -
                                          oracle::pairwiseMacroAuc(truth, scores, classes)));
    }
    std::size_t f1Failures = 0;
    const auto cases = oracle::handCountedF1Cases();
    for (const auto& c : cases) f1Failures += std::fabs(eval::macroF1(c.truth, c.pred, c.classes) - c.expected) > 1e-12;
    return {worst <= 1e-9 && f1Failures == 0,
            "AUROC largest deviation over 100 instances " + fmt(worst, 12) + "; macro-F1 " +
                std::to_string(cases.size() - f1Failures) + "/" + std::to_string(cases.size()) + " hand counts match"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("missing " + p.string());
    std::stringstream b;
    b << in.rdbuf();
    return b.str();
}

void writeJson(const fs::path& p, const json& doc) {
    std::ofstream out(p);
    out << doc.dump(2) << "\n";
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "timexl_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    writeJson(root / "spec.json", {{"seed", 3}, {"samples", 200}, {"motif_amplitude", 0.3}, {"hint_corruption_rate", 0.3},
                                   {"latent_cue", true}});
    writeJson(root / "config.json", {{"encoder", {{"epochs", 15}}}, {"iterations", 2}, {"early_stop", {{"enabled", false}}},
                                     {"agents", {{"backoff_seconds", 0.0}}}});
    writeJson(root / "script.json", improvingScript());

    std::ostringstream sink;
    const auto cli = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };
    const std::string data = (root / "data").string();
    int rc = cli({"synth", "--spec", (root / "spec.json").string(), "--out", data});
    for (const char* name : {"a", "b"}) {
        const std::string out = (root / name).string();
        rc |= cli({"loop", "--data", data, "--config", (root / "config.json").string(), "--client",
                   "scripted:" + (root / "script.json").string(), "--out", out});
        rc |= cli({"test", "--run", out});
    }
    if (rc != 0) return {false, "CLI failed: " + sink.str()};

    std::vector<fs::path> files = {"checkpoint.json", "predictions.jsonl", "transcript.jsonl", "report.json"};
    for (const auto& entry : fs::directory_iterator(root / "a" / "iterations")) {
        files.push_back(fs::path("iterations") / entry.path().filename());
    }
    std::size_t differing = 0;
    for (const auto& f : files) differing += slurp(root / "a" / f) != slurp(root / "b" / f);
    const bool pass = differing == 0 && files.size() >= 6;
    return {pass, std::to_string(files.size()) + " artifacts compared across two loop+test runs, " +
                      std::to_string(differing) + " differ"};
}

// Central differences of regressionForward against the traced gradient.
struct RegressionGradCheck {
    std::size_t checked = 0, failed = 0, kinks = 0;
};

RegressionGradCheck checkRegressionGradient(encoder::EncoderModel model,
                                            const std::vector<const data::MultiModalSample*>& samples) {
    RegressionGradCheck out;
    const double step = 1e-5;
    for (const auto* s : samples) {
        const std::vector<const data::MultiModalSample*> batch = {s};
        const auto graph = encoder::buildObjective(model, batch);
        const auto grads = numerics::gradientOf(graph.trace, graph.regressionOutputs.at(0));
        const auto base = graph.trace.branchSignature();
        const auto value = [&] { return encoder::regressionForward(encoder::encodeTime(s->series, model), model); };
        for (auto& [name, tensor] : model.parameters()) {
            if (!grads.contains(name)) continue;
            const auto& analytic = grads.of(name);
            for (std::size_t i = 0; i < tensor->size(); ++i) {
                const double original = (*tensor)[i];
                (*tensor)[i] = original + step;
                const double up = value();
                (*tensor)[i] = original - step;
                const double down = value();
                (*tensor)[i] = original;
                const double numeric = (up - down) / (2 * step);
                if (numerics::gradientsAgree(analytic[i], numeric, 1e-4, 1e-6)) {
                    ++out.checked;
                    continue;
                }
                bool kink = false;
                for (double delta : {step, -step}) {
                    (*tensor)[i] = original + delta;
                    kink = kink || encoder::buildObjective(model, batch).trace.branchSignature() != base;
                    (*tensor)[i] = original;
                }
                if (kink) {
                    ++out.kinks;
                } else {
                    ++out.checked;
                    ++out.failed;
                }
            }
        }
    }
    return out;
}

Outcome regressionBranch() {
    data::SyntheticSpec spec;
    spec.samples = 600;
    spec.seed = 11;
    spec.seriesNoise = 0.3;
    spec.regression.enabled = true;
    spec.regression.slope = 1.0;
    spec.regression.intercept = 0.0;
    spec.regression.targetNoise = 0.1;
    const auto ds = preparedSynthetic(spec, 64);
    encoder::EncoderConfig cfg;
    cfg.channels = ds.manifest.channels;
    cfg.steps = ds.manifest.steps;
    cfg.regression = true;
    cfg.epochs = 200;
    const auto train = data::selectSplit(ds.samples, data::Split::train);
    const auto val = data::selectSplit(ds.samples, data::Split::validation);
    const auto result = encoder::trainEncoder(train, val, cfg, spec.seed);
    const auto pred = encoder::predict(result.model, val);
    const double rmse = encoder::rootMeanSquaredError(pred.regression, val);

    const std::vector<const data::MultiModalSample*> probe(val.begin(), val.begin() + 5);
    const auto grad = checkRegressionGradient(result.model, probe);
    const double sigma = spec.regression.targetNoise;
    const bool pass = rmse <= 2 * sigma && grad.failed == 0 && grad.checked > 0;
    return {pass, "validation RMSE " + fmt(rmse) + " (limit " + fmt(2 * sigma, 2) + "); regression output gradient " +
                      std::to_string(grad.checked - grad.failed) + "/" + std::to_string(grad.checked) +
                      " entries agree, " + std::to_string(grad.kinks) + " skipped at kinks"};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient correctness", gradientCorrectness},
        {"loss-term oracles", lossOracles},
        {"projection contract", projectionContract},
        {"synthetic encoder learning", syntheticLearning},
        {"explanation-label consistency", explanationConsistency},
        {"loop improvement", loopImprovement},
        {"prototype-context benefit", prototypeContext},
        {"fusion boundaries", fusionBoundaries},
        {"metric oracles", metricOracles},
        {"determinism", determinism},
        {"regression branch", regressionBranch},
    };
    std::size_t failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("criterion %2zu %-30s %s  %s [%.1fs]\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str(), seconds(start));
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
