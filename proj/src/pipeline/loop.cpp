#include "timexl/pipeline/loop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "timexl/encoder/training.hpp"
#include "timexl/error.hpp"

namespace timexl::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw InvalidConfigError("loop config: " + message);
}

ordered_json scoreJson(const ScorePair& s) { return {{"macro_f1", s.macroF1}, {"auc", s.auc}}; }

ScorePair scoreFromJson(const json& doc) {
    return {doc.at("macro_f1").get<double>(), doc.at("auc").get<double>()};
}

agents::CallCategory categoryFromString(const std::string& name) {
    for (auto c : {agents::CallCategory::predict, agents::CallCategory::reflect, agents::CallCategory::refine,
                   agents::CallCategory::probe}) {
        if (agents::toString(c) == name) return c;
    }
    throw SchemaError("unknown call category '" + name + "'");
}

ScorePair scores(const std::vector<std::size_t>& truth, const std::vector<std::vector<double>>& probs,
                 std::size_t classes) {
    std::vector<std::size_t> labels;
    labels.reserve(probs.size());
    for (const auto& p : probs) labels.push_back(eval::argmax(p));
    return {eval::macroF1(truth, labels, classes), eval::aurocOvR(truth, probs, classes)};
}

std::string windowText(const std::string& sampleId, std::size_t step) {
    return "time window of sample " + sampleId + " starting at step " + std::to_string(step);
}

void checkContext(const LoopContext& ctx) {
    if (!ctx.agents.client || !ctx.agents.ledger) throw ContractError("loop: agent context has no client or ledger");
    if (!ctx.embedder || !ctx.cache) throw ContractError("loop: no embedding provider or cache");
    if (ctx.manifest.task != data::TaskKind::classification) {
        throw ContractError("loop: only classification datasets are supported");
    }
    if (ctx.agents.options.labels != ctx.manifest.labelNames) {
        throw ContractError("loop: agent labels differ from the dataset's label names");
    }
}

struct Prediction {
    std::vector<double> encoder;
    agents::LabelPrediction llm;
    encoder::Explanation explanation;
};

std::vector<Prediction> predictAll(const std::vector<const data::MultiModalSample*>& samples,
                                   const encoder::EncoderModel& model, LoopContext& ctx,
                                   const LoopConfig& config) {
    const auto enc = encoder::predict(model, samples);
    std::vector<Prediction> out(samples.size());
    agents::forEachParallel(ctx.agents, samples.size(), [&](agents::AgentContext& a, std::size_t i) {
        out[i].encoder = enc.probabilities[i];
        out[i].explanation = encoder::explain(*samples[i], model, config.omega, config.explanationModality);
        out[i].llm = agents::predictWithLLM(a, samples[i]->segments,
                                            explanationLines(out[i].explanation, ctx.manifest.labelNames));
    });
    return out;
}

}  // namespace

void LoopConfig::validate() const {
    encoder.validate();
    require(!encoder.regression, "the loop supports classification only");
    require(iterations >= 1, "iterations must be >= 1");
    require(omega >= 1, "omega must be >= 1");
    require(earlyStop.epsilon >= 0.0 && !std::isnan(earlyStop.epsilon), "early_stop.epsilon must be >= 0");
    require(earlyStop.patience >= 1, "early_stop.patience must be >= 1");
}

ordered_json toJson(const LoopConfig& c) {
    ordered_json doc;
    doc["encoder"] = encoder::toJson(c.encoder);
    doc["agents"] = agents::toJson(c.agents);
    doc["iterations"] = c.iterations;
    doc["omega"] = c.omega;
    doc["explanation_modality"] = encoder::toString(c.explanationModality);
    ordered_json stop;
    stop["enabled"] = c.earlyStop.enabled;
    if (std::isinf(c.earlyStop.epsilon)) {
        stop["epsilon"] = "inf";
    } else {
        stop["epsilon"] = c.earlyStop.epsilon;
    }
    stop["patience"] = c.earlyStop.patience;
    doc["early_stop"] = stop;
    doc["selective_refinement"] = c.selectiveRefinement;
    doc["text_quality_probe"] = c.textQualityProbe;
    doc["seed"] = c.seed;
    return doc;
}

LoopConfig loopConfigFromJson(const json& doc) {
    static const std::vector<std::string> known = {"encoder", "agents", "iterations", "omega",
                                                   "explanation_modality", "early_stop", "selective_refinement",
                                                   "text_quality_probe", "seed"};
    if (!doc.is_object()) throw InvalidConfigError("loop config must be an object");
    for (const auto& [key, _] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InvalidConfigError("loop config: unknown key '" + key + "'");
        }
    }
    LoopConfig c;
    try {
        if (doc.contains("encoder")) c.encoder = encoder::encoderConfigFromJson(doc.at("encoder"));
        if (doc.contains("agents")) c.agents = agents::agentOptionsFromJson(doc.at("agents"));
        c.iterations = doc.value("iterations", c.iterations);
        c.omega = doc.value("omega", c.omega);
        if (doc.contains("explanation_modality")) {
            c.explanationModality = encoder::modalityFromString(doc.at("explanation_modality").get<std::string>());
        }
        if (doc.contains("early_stop")) {
            const auto& s = doc.at("early_stop");
            for (const auto& [key, _] : s.items()) {
                if (key != "enabled" && key != "epsilon" && key != "patience") {
                    throw InvalidConfigError("loop config: unknown early_stop key '" + key + "'");
                }
            }
            c.earlyStop.enabled = s.value("enabled", c.earlyStop.enabled);
            if (s.contains("epsilon")) {
                const auto& e = s.at("epsilon");
                if (e.is_string() && e.get<std::string>() == "inf") {
                    c.earlyStop.epsilon = std::numeric_limits<double>::infinity();
                } else {
                    c.earlyStop.epsilon = e.get<double>();
                }
            }
            c.earlyStop.patience = s.value("patience", c.earlyStop.patience);
        }
        c.selectiveRefinement = doc.value("selective_refinement", c.selectiveRefinement);
        c.textQualityProbe = doc.value("text_quality_probe", c.textQualityProbe);
        c.seed = doc.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw InvalidConfigError(std::string("loop config: ") + e.what());
    }
    c.validate();
    return c;
}

ordered_json toJson(const IterationReport& r) {
    ordered_json doc;
    doc["iteration"] = r.iteration;
    doc["encoder"] = scoreJson(r.encoder);
    doc["llm"] = scoreJson(r.llm);
    doc["fused"] = scoreJson(r.fused);
    doc["alpha"] = r.alpha;
    doc["text_quality"] = r.textQuality;
    doc["improved"] = r.improved;
    doc["best_fused_f1"] = r.bestFusedF1;
    doc["encoder_best_epoch"] = r.encoderBestEpoch;
    doc["llm_failures"] = r.llmFailures;
    doc["refinement_fallbacks"] = r.refinementFallbacks;
    doc["refinement_skipped"] = r.refinementSkipped;
    doc["usage"] = agents::toJson(r.usage, false);
    return doc;
}

IterationReport iterationReportFromJson(const json& doc) {
    IterationReport r;
    try {
        r.iteration = doc.at("iteration").get<std::size_t>();
        r.encoder = scoreFromJson(doc.at("encoder"));
        r.llm = scoreFromJson(doc.at("llm"));
        r.fused = scoreFromJson(doc.at("fused"));
        r.alpha = doc.at("alpha").get<double>();
        r.textQuality = doc.at("text_quality").get<double>();
        r.improved = doc.at("improved").get<bool>();
        r.bestFusedF1 = doc.at("best_fused_f1").get<double>();
        r.encoderBestEpoch = doc.at("encoder_best_epoch").get<std::size_t>();
        r.llmFailures = doc.at("llm_failures").get<std::size_t>();
        r.refinementFallbacks = doc.at("refinement_fallbacks").get<std::size_t>();
        r.refinementSkipped = doc.at("refinement_skipped").get<std::size_t>();
        for (const auto& [name, row] : doc.at("usage").items()) {
            auto& t = r.usage[categoryFromString(name)];
            t.calls = row.at("calls").get<std::size_t>();
            t.inputTokens = row.at("input_tokens").get<std::size_t>();
            t.outputTokens = row.at("output_tokens").get<std::size_t>();
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("iteration report: ") + e.what());
    }
    return r;
}

eval::IterationRow toRow(const IterationReport& r) {
    return {r.iteration, r.encoder.macroF1, r.encoder.auc, r.llm.macroF1, r.llm.auc,
            r.fused.macroF1, r.fused.auc, r.alpha, r.textQuality};
}

data::Dataset prepareDataset(data::Dataset dataset, std::uint64_t seed, data::EmbeddingProvider& embedder,
                             data::EmbeddingCache& cache) {
    if (dataset.samples.empty()) throw ContractError("dataset has no samples");
    const bool unassigned = std::any_of(dataset.samples.begin(), dataset.samples.end(),
                                        [](const auto& s) { return s.split == data::Split::unassigned; });
    if (unassigned) dataset.samples = data::splitDataset(std::move(dataset.samples), dataset.manifest.splitRatios, seed);
    if (!dataset.manifest.normalization) dataset.manifest.normalization = data::fitNormalization(dataset.samples);
    dataset.samples = data::normalize(std::move(dataset.samples), dataset.manifest);
    data::embedSegments(embedder, dataset.samples, cache);
    return dataset;
}

LoopState initialState(const data::Dataset& prepared) {
    LoopState s;
    s.samples = prepared.samples;
    for (const auto& sample : s.samples) {
        if (sample.split == data::Split::unassigned) throw ContractError("sample " + sample.id + " has no split");
        if (!sample.embedded()) throw ContractError("sample " + sample.id + " is not embedded");
    }
    return s;
}

std::vector<agents::ExplanationLine> explanationLines(const encoder::Explanation& explanation,
                                                      const std::vector<std::string>& labels) {
    std::vector<agents::ExplanationLine> out;
    for (const auto& item : explanation.items) {
        agents::ExplanationLine line;
        line.prototypeLabel = item.classIndex < labels.size() ? labels[item.classIndex]
                                                              : std::to_string(item.classIndex);
        line.score = item.score;
        if (explanation.modality == encoder::Modality::text) {
            line.prototypeText = item.provenance.text;
            line.matchedText = item.segmentText;
        } else {
            line.prototypeText = windowText(item.provenance.sampleId, item.provenance.segment);
            line.matchedText = "time window starting at step " + std::to_string(item.segment);
        }
        out.push_back(std::move(line));
    }
    return out;
}

LoopState runIteration(const LoopState& state, LoopContext& ctx, const LoopConfig& config) {
    checkContext(ctx);
    LoopState s = state;
    const auto usageBefore = ctx.agents.ledger->snapshot();
    const std::size_t classes = ctx.manifest.classCount();
    IterationReport report;
    report.iteration = s.iteration;

    const auto train = data::selectSplit(s.samples, data::Split::train);
    const auto val = data::selectSplit(s.samples, data::Split::validation);
    if (train.empty() || val.empty()) throw ContractError("loop needs training and validation samples");

    const auto trained = encoder::trainEncoder(train, val, config.encoder, config.seed + s.iteration);
    const auto& model = trained.model;
    report.encoderBestEpoch = trained.bestEpoch;

    std::vector<std::size_t> truth;
    for (const auto* v : val) truth.push_back(v->label);

    if (config.textQualityProbe) {
        std::vector<agents::LabelPrediction> probe(val.size());
        agents::forEachParallel(ctx.agents, val.size(), [&](agents::AgentContext& a, std::size_t i) {
            probe[i] = agents::predictWithLLM(a, val[i]->segments, {}, agents::CallCategory::probe);
        });
        std::size_t hits = 0;
        for (std::size_t i = 0; i < val.size(); ++i) hits += probe[i].label && *probe[i].label == truth[i];
        report.textQuality = static_cast<double>(hits) / static_cast<double>(val.size());
    }

    const auto preds = predictAll(val, model, ctx, config);
    std::vector<FusionRecord> records;
    for (std::size_t i = 0; i < val.size(); ++i) {
        records.push_back({preds[i].encoder, preds[i].llm, truth[i]});
        report.llmFailures += preds[i].llm.status != agents::ParseStatus::ok;
    }
    const auto chosen = selectAlpha(records, classes);
    report.alpha = chosen.alpha;

    std::vector<std::vector<double>> encProbs, llmProbs, fusedProbs;
    for (const auto& r : records) {
        encProbs.push_back(r.encoder);
        llmProbs.push_back(fusePredictions(r.encoder, r.llm, 0.0));
        fusedProbs.push_back(fusePredictions(r.encoder, r.llm, chosen.alpha));
    }
    report.encoder = scores(truth, encProbs, classes);
    report.llm = scores(truth, llmProbs, classes);
    report.fused = scores(truth, fusedProbs, classes);

    const auto trainPreds = encoder::predict(model, train);
    std::vector<agents::ReflectionRecord> reflectionRecords;
    for (std::size_t i = 0; i < train.size(); ++i) {
        reflectionRecords.push_back({train[i]->label, trainPreds.labels[i], train[i]->segments});
    }
    const auto reflection = agents::reflect(ctx.agents, reflectionRecords, s.iteration);

    const double bestBefore = s.best ? s.best->fusedF1 : -1.0;
    if (report.fused.macroF1 > bestBefore) {
        s.best = BestState{model, reflection, chosen.alpha, report.fused.macroF1, report.fused.auc, s.iteration};
        report.improved = true;
    }
    report.bestFusedF1 = s.best->fusedF1;

    std::vector<std::string> correct;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (trainPreds.labels[i] == train[i]->label) correct.push_back(train[i]->id);
    }
    for (std::size_t i = 0; i < val.size(); ++i) {
        if (eval::argmax(fusedProbs[i]) == truth[i]) correct.push_back(val[i]->id);
    }
    std::sort(correct.begin(), correct.end());

    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        const auto& sample = s.samples[i];
        if (sample.split != data::Split::train && sample.split != data::Split::validation) continue;
        if (config.selectiveRefinement && std::binary_search(state.correct.begin(), state.correct.end(), sample.id)) {
            ++report.refinementSkipped;
            continue;
        }
        targets.push_back(i);
    }
    std::vector<agents::Refinement> refined(targets.size());
    agents::forEachParallel(ctx.agents, targets.size(), [&](agents::AgentContext& a, std::size_t j) {
        refined[j] = agents::refineText(a, reflection.summary, s.samples[targets[j]].segments,
                                        ctx.manifest.segmentation, config.encoder.textKernel);
    });
    for (std::size_t j = 0; j < targets.size(); ++j) {
        auto& sample = s.samples[targets[j]];
        report.refinementFallbacks += refined[j].fellBack;
        if (refined[j].segments == sample.segments) continue;
        sample.segments = std::move(refined[j].segments);
        data::embedSample(*ctx.embedder, *ctx.cache, sample);
    }
    s.correct = std::move(correct);

    const double gain = report.fused.macroF1 - std::max(bestBefore, 0.0);
    if (config.earlyStop.enabled) {
        s.stale = gain < config.earlyStop.epsilon ? s.stale + 1 : 0;
        if (s.stale >= config.earlyStop.patience) s.stopped = true;
    }

    report.usage = agents::usageDelta(usageBefore, ctx.agents.ledger->snapshot());
    spdlog::info("iteration {}: encoder F1 {:.4f}, LLM F1 {:.4f}, fused F1 {:.4f} (alpha {:.1f}), text quality {:.4f}",
                 report.iteration, report.encoder.macroF1, report.llm.macroF1, report.fused.macroF1, report.alpha,
                 report.textQuality);
    s.history.push_back(std::move(report));
    ++s.iteration;
    return s;
}

LoopState runLoop(const data::Dataset& prepared, LoopContext& ctx, const LoopConfig& config,
                  const std::function<void(const LoopState&)>& onIteration) {
    config.validate();
    LoopState state = initialState(prepared);
    while (state.iteration < config.iterations && !state.stopped) {
        state = runIteration(state, ctx, config);
        if (onIteration) onIteration(state);
    }
    return state;
}

ordered_json toJson(const TestRecord& r, const std::vector<std::string>& labels) {
    const auto name = [&](std::size_t c) { return c < labels.size() ? labels[c] : std::to_string(c); };
    ordered_json doc;
    doc["id"] = r.id;
    doc["truth"] = name(r.truth);
    doc["encoder"] = r.encoder;
    doc["llm"] = r.llm ? ordered_json(name(*r.llm)) : ordered_json(nullptr);
    doc["fused"] = r.fused;
    doc["prediction"] = name(r.fusedLabel);
    doc["segments"] = r.segments;
    doc["explanations"] = r.explanations;
    return doc;
}

TestResult testPhase(const std::optional<BestState>& best, std::vector<data::MultiModalSample> test,
                     LoopContext& ctx, const LoopConfig& config) {
    if (!best) throw ContractError("test phase needs a best state; run the loop first");
    if (test.empty()) throw ContractError("test split is empty");
    checkContext(ctx);
    const std::size_t classes = ctx.manifest.classCount();

    std::vector<agents::Refinement> refined(test.size());
    agents::forEachParallel(ctx.agents, test.size(), [&](agents::AgentContext& a, std::size_t i) {
        refined[i] = agents::refineText(a, best->reflection.summary, test[i].segments, ctx.manifest.segmentation,
                                        config.encoder.textKernel);
    });
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (refined[i].segments != test[i].segments || !test[i].embedded()) {
            test[i].segments = std::move(refined[i].segments);
            data::embedSample(*ctx.embedder, *ctx.cache, test[i]);
        }
    }

    std::vector<const data::MultiModalSample*> ptrs;
    for (const auto& t : test) ptrs.push_back(&t);
    const auto preds = predictAll(ptrs, best->model, ctx, config);

    TestResult result;
    result.alpha = best->alpha;
    std::vector<std::size_t> truth, encLabels, llmLabels, fusedLabels;
    std::vector<std::vector<double>> encProbs, llmProbs, fusedProbs;
    for (std::size_t i = 0; i < test.size(); ++i) {
        TestRecord r;
        r.id = test[i].id;
        r.truth = test[i].label;
        r.encoder = preds[i].encoder;
        if (preds[i].llm.status == agents::ParseStatus::ok) r.llm = preds[i].llm.label;
        r.fused = fusePredictions(preds[i].encoder, preds[i].llm, best->alpha);
        r.fusedLabel = eval::argmax(r.fused);
        r.segments = test[i].segments;
        for (const auto& item : preds[i].explanation.items) {
            r.explanations.push_back(encoder::describe(item, ctx.manifest.labelNames));
        }
        truth.push_back(r.truth);
        encProbs.push_back(r.encoder);
        encLabels.push_back(eval::argmax(r.encoder));
        llmProbs.push_back(fusePredictions(preds[i].encoder, preds[i].llm, 0.0));
        llmLabels.push_back(eval::argmax(llmProbs.back()));
        fusedProbs.push_back(r.fused);
        fusedLabels.push_back(r.fusedLabel);
        result.records.push_back(std::move(r));
    }
    result.encoder = eval::evaluate(truth, encLabels, encProbs, classes);
    result.llm = eval::evaluate(truth, llmLabels, llmProbs, classes);
    result.fused = eval::evaluate(truth, fusedLabels, fusedProbs, classes);
    return result;
}

}  // namespace timexl::pipeline
