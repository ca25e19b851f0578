#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "timexl/agents/http_client.hpp"
#include "timexl/agents/scripted.hpp"
#include "timexl/data/dataset.hpp"
#include "timexl/data/embedding.hpp"
#include "timexl/data/synthetic.hpp"
#include "timexl/encoder/gradcheck.hpp"
#include "timexl/encoder/training.hpp"
#include "timexl/error.hpp"
#include "timexl/eval/metrics.hpp"
#include "timexl/eval/report.hpp"
#include "timexl/pipeline/checkpoint.hpp"
#include "timexl/pipeline/loop.hpp"

namespace timexl::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kRunFile = "run.json";
constexpr const char* kCacheFile = "embeddings.cache";

json readJson(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidConfigError(path.string() + ": " + e.what());
    }
}

std::vector<json> readJsonLines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<json> rows;
    std::size_t row = 0;
    for (std::string line; std::getline(in, line);) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw SchemaError(path.string() + " row " + std::to_string(row) + ": " + e.what());
        }
    }
    return rows;
}

// Fills dataset-determined fields, rejecting explicit values that disagree.
pipeline::LoopConfig configFor(const json& doc, const data::DatasetManifest& manifest) {
    auto config = pipeline::loopConfigFromJson(doc);
    const json enc = doc.value("encoder", json::object());
    const auto pin = [&](const char* key, std::size_t& field, std::size_t value) {
        if (enc.contains(key) && enc.at(key).get<std::size_t>() != value) {
            throw InvalidConfigError(std::string("encoder.") + key + " is " + std::to_string(field) +
                                     " but the dataset has " + std::to_string(value));
        }
        field = value;
    };
    pin("classes", config.encoder.classes, manifest.classCount());
    pin("channels", config.encoder.channels, manifest.channels);
    pin("steps", config.encoder.steps, manifest.steps);
    config.encoder.regression = manifest.task == data::TaskKind::regression;
    if (config.agents.labels.empty()) config.agents.labels = manifest.labelNames;
    if (config.agents.labels != manifest.labelNames) {
        throw InvalidConfigError("agents.labels differ from the dataset's label names");
    }
    config.encoder.validate();
    return config;
}

std::unique_ptr<agents::LlmClient> makeClient(const std::string& spec) {
    if (spec == "live") return std::make_unique<agents::HttpLlmClient>(agents::httpOptionsFromEnvironment());
    const std::string prefix = "scripted:";
    if (spec.rfind(prefix, 0) == 0) {
        return std::make_unique<agents::ScriptedClient>(readJson(spec.substr(prefix.size())));
    }
    throw InvalidConfigError("--client must be 'live' or 'scripted:<file>', got '" + spec + "'");
}

struct Prepared {
    data::Dataset dataset;
    std::unique_ptr<data::HashingEmbedder> embedder;
    std::unique_ptr<data::EmbeddingCache> cache;
};

Prepared prepare(data::Dataset raw, const pipeline::LoopConfig& config, const fs::path& runDir) {
    Prepared p;
    p.embedder = std::make_unique<data::HashingEmbedder>(config.encoder.embeddingDim);
    p.cache = std::make_unique<data::EmbeddingCache>(runDir / kCacheFile);
    p.dataset = pipeline::prepareDataset(std::move(raw), config.seed, *p.embedder, *p.cache);
    return p;
}

std::string absolute(const std::string& path) { return fs::absolute(path).lexically_normal().string(); }

// -- synth ---------------------------------------------------------------

int synth(const std::string& specPath, const std::string& outDir, std::ostream& out) {
    const auto spec = data::syntheticSpecFromJson(readJson(specPath));
    const auto ds = data::synthesizeDataset(spec);
    data::saveDataset(outDir, ds);
    out << "wrote " << ds.samples.size() << " samples with " << ds.manifest.classCount() << " classes to " << outDir
        << "\n";
    return kOk;
}

// -- train ---------------------------------------------------------------

int train(const std::string& dataDir, const std::string& configPath, const std::string& runDir, std::ostream& out) {
    auto raw = data::loadDataset(dataDir);
    const auto config = configFor(readJson(configPath), raw.manifest);
    fs::create_directories(runDir);
    auto p = prepare(std::move(raw), config, runDir);
    const auto trainSplit = data::selectSplit(p.dataset.samples, data::Split::train);
    const auto valSplit = data::selectSplit(p.dataset.samples, data::Split::validation);
    const auto result = encoder::trainEncoder(trainSplit, valSplit, config.encoder, config.seed);

    const pipeline::RunPaths run{runDir};
    pipeline::writeText(run.config(), pipeline::toJson(config).dump(2) + "\n");
    pipeline::writeText(run.root / "model.json", encoder::toJson(result.model).dump() + "\n");
    pipeline::writeText(run.root / "manifest.json", data::toJson(p.dataset.manifest).dump(2) + "\n");
    ordered_json history = ordered_json::array();
    for (const auto& e : result.history) {
        ordered_json row;
        row["epoch"] = e.epoch;
        row["loss"] = e.loss.total;
        row["validation_f1"] = e.validationF1;
        row["validation_auc"] = e.validationAuc;
        if (e.validationRmse) row["validation_rmse"] = *e.validationRmse;
        history.push_back(std::move(row));
    }
    ordered_json summary;
    summary["best_epoch"] = result.bestEpoch;
    summary["history"] = std::move(history);
    pipeline::writeText(run.root / "training.json", summary.dump(2) + "\n");

    if (result.bestEpoch > 0) {
        const auto& best = result.history.at(result.bestEpoch - 1);
        out << "best epoch " << result.bestEpoch << ": validation macro-F1 " << best.validationF1 << ", AUC "
            << best.validationAuc;
        if (best.validationRmse) out << ", RMSE " << *best.validationRmse;
        out << "\n";
    } else {
        out << "no epochs run\n";
    }
    return kOk;
}

// -- loop ----------------------------------------------------------------

struct LoopSession {
    std::unique_ptr<agents::LlmClient> client;
    agents::UsageLedger ledger;
    std::unique_ptr<agents::Transcript> transcript;
    pipeline::LoopContext ctx;
};

void bindSession(LoopSession& s, const std::string& clientSpec, const fs::path& transcriptPath,
                 const pipeline::LoopConfig& config, const data::DatasetManifest& manifest, Prepared& p) {
    s.client = makeClient(clientSpec);
    s.transcript = std::make_unique<agents::Transcript>(transcriptPath);
    s.ctx.agents.client = s.client.get();
    s.ctx.agents.ledger = &s.ledger;
    s.ctx.agents.transcript = s.transcript.get();
    s.ctx.agents.options = config.agents;
    s.ctx.manifest = manifest;
    s.ctx.embedder = p.embedder.get();
    s.ctx.cache = p.cache.get();
}

eval::ReportRecords reportRecords(const std::vector<pipeline::IterationReport>& history) {
    eval::ReportRecords records;
    for (const auto& r : history) records.iterations.push_back(pipeline::toRow(r));
    return records;
}

int loop(const std::string& dataDir, const std::string& configPath, const std::string& clientSpec,
         const std::string& runDir, std::ostream& out) {
    auto raw = data::loadDataset(dataDir);
    const auto config = configFor(readJson(configPath), raw.manifest);
    config.validate();
    const pipeline::RunPaths run{runDir};
    fs::create_directories(run.root);
    for (const auto& stale : {run.transcript(), run.checkpoint(), run.predictions(), run.report(), run.table()}) {
        fs::remove(stale);
    }
    fs::remove_all(run.root / "iterations");

    auto p = prepare(std::move(raw), config, run.root);
    LoopSession session;
    bindSession(session, clientSpec, run.transcript(), config, p.dataset.manifest, p);

    pipeline::writeText(run.config(), pipeline::toJson(config).dump(2) + "\n");
    ordered_json meta;
    meta["data"] = absolute(dataDir);
    meta["client"] = clientSpec;
    pipeline::writeText(run.root / kRunFile, meta.dump(2) + "\n");

    const auto state = pipeline::runLoop(p.dataset, session.ctx, config, [&](const pipeline::LoopState& s) {
        pipeline::writeIterationReport(run, s.history.back());
        pipeline::saveCheckpoint(pipeline::makeCheckpoint(s, config, p.dataset.manifest), run.checkpoint());
    });
    const auto records = reportRecords(state.history);
    eval::emitReport(records, run.report(), eval::ReportFormat::document);
    eval::emitReport(records, run.table(), eval::ReportFormat::table);

    for (const auto& r : state.history) {
        out << "iteration " << r.iteration << ": encoder F1 " << r.encoder.macroF1 << ", LLM F1 " << r.llm.macroF1
            << ", fused F1 " << r.fused.macroF1 << " (alpha " << r.alpha << "), text quality " << r.textQuality
            << "\n";
    }
    out << "best iteration " << state.best->iteration << " with fused F1 " << state.best->fusedF1 << "\n";
    return kOk;
}

// -- test ----------------------------------------------------------------

json runMeta(const pipeline::RunPaths& run) {
    return fs::exists(run.root / kRunFile) ? readJson(run.root / kRunFile) : json::object();
}

std::string fromRun(const std::string& given, const json& meta, const char* key, const char* flag) {
    if (!given.empty()) return given;
    if (meta.contains(key)) return meta.at(key).get<std::string>();
    throw InvalidConfigError(std::string("pass ") + flag + "; the run directory does not record one");
}

data::Dataset restoreDataset(const std::string& dataDir, const pipeline::Checkpoint& cp) {
    auto raw = data::loadDataset(dataDir);
    if (raw.manifest.labelNames != cp.manifest.labelNames || raw.manifest.channels != cp.manifest.channels ||
        raw.manifest.steps != cp.manifest.steps) {
        throw ContractError("dataset " + dataDir + " does not match the run's dataset");
    }
    raw.manifest.normalization = cp.manifest.normalization;
    return raw;
}

int test(const std::string& runDir, const std::string& dataArg, const std::string& clientArg, std::ostream& out) {
    const pipeline::RunPaths run{runDir};
    const auto cp = pipeline::loadCheckpoint(run.checkpoint());
    const auto meta = runMeta(run);
    const auto dataDir = fromRun(dataArg, meta, "data", "--data");
    const auto clientSpec = fromRun(clientArg, meta, "client", "--client");

    auto p = prepare(restoreDataset(dataDir, cp), cp.config, run.root);
    const fs::path transcriptPath = run.root / "test_transcript.jsonl";
    fs::remove(transcriptPath);
    LoopSession session;
    bindSession(session, clientSpec, transcriptPath, cp.config, cp.manifest, p);

    std::vector<data::MultiModalSample> testSplit;
    for (const auto& s : p.dataset.samples) {
        if (s.split == data::Split::test) testSplit.push_back(s);
    }
    const auto result = pipeline::testPhase(cp.best, std::move(testSplit), session.ctx, cp.config);
    pipeline::writePredictions(run, result, cp.manifest.labelNames);

    ordered_json metrics;
    metrics["alpha"] = result.alpha;
    metrics["encoder"] = eval::toJson(result.encoder);
    metrics["llm"] = eval::toJson(result.llm);
    metrics["fused"] = eval::toJson(result.fused);
    pipeline::writeText(run.root / "test_metrics.json", metrics.dump(2) + "\n");
    if (!cp.history.empty()) {
        auto records = reportRecords(cp.history);
        records.summary = result.fused;
        eval::emitReport(records, run.report(), eval::ReportFormat::document);
        eval::emitReport(records, run.table(), eval::ReportFormat::table);
    }
    out << result.records.size() << " test samples, alpha " << result.alpha << "\n"
        << "encoder F1 " << result.encoder.macroF1 << " AUC " << result.encoder.auc << "\n"
        << "LLM     F1 " << result.llm.macroF1 << " AUC " << result.llm.auc << "\n"
        << "fused   F1 " << result.fused.macroF1 << " AUC " << result.fused.auc << "\n";
    return kOk;
}

// -- explain -------------------------------------------------------------

int explainCommand(const std::string& runDir, const std::string& sampleId, std::size_t omega,
                   const std::string& modalityName, const std::string& dataArg, std::ostream& out) {
    const pipeline::RunPaths run{runDir};
    const auto cp = pipeline::loadCheckpoint(run.checkpoint());
    if (!cp.best) throw ContractError("run has no best model");
    if (omega == 0) throw InvalidConfigError("--omega must be >= 1");
    const auto modality = encoder::modalityFromString(modalityName);
    const auto dataDir = fromRun(dataArg, runMeta(run), "data", "--data");
    auto p = prepare(restoreDataset(dataDir, cp), cp.config, run.root);
    const auto it = std::find_if(p.dataset.samples.begin(), p.dataset.samples.end(),
                                 [&](const auto& s) { return s.id == sampleId; });
    if (it == p.dataset.samples.end()) throw ContractError("no sample with id '" + sampleId + "'");

    const auto trace = encoder::forward(*it, cp.best->model);
    const auto& labels = cp.manifest.labelNames;
    const std::size_t predicted = eval::argmax(trace.probabilities);
    out << "sample " << it->id << " (" << data::toString(it->split) << "), truth " << labels.at(it->label)
        << ", encoder prediction " << labels.at(predicted) << " (p=" << trace.probabilities[predicted] << ")\n";
    const auto explanation = encoder::explain(*it, cp.best->model, omega, modality);
    std::size_t rank = 1;
    for (const auto& item : explanation.items) out << rank++ << ". " << encoder::describe(item, labels) << "\n";
    return kOk;
}

// -- eval ----------------------------------------------------------------

struct LabelSpace {
    std::vector<std::string> names;

    std::size_t index(const json& v, const std::string& where) const {
        if (v.is_number_integer()) {
            const auto i = v.get<std::int64_t>();
            if (i < 0 || static_cast<std::size_t>(i) >= names.size()) {
                throw SchemaError(where + ": label index " + std::to_string(i) + " out of range");
            }
            return static_cast<std::size_t>(i);
        }
        if (v.is_string()) {
            const auto it = std::find(names.begin(), names.end(), v.get<std::string>());
            if (it == names.end()) throw SchemaError(where + ": unknown label '" + v.get<std::string>() + "'");
            return static_cast<std::size_t>(it - names.begin());
        }
        throw SchemaError(where + ": label must be a name or an index");
    }
};

int evalCommand(const std::string& predPath, const std::string& truthPath, std::ostream& out) {
    std::map<std::string, json> truthRows;
    LabelSpace space;
    if (fs::is_directory(truthPath)) {
        const auto ds = data::loadDataset(truthPath);
        space.names = ds.manifest.labelNames;
        for (const auto& s : ds.samples) truthRows[s.id] = s.label;
    } else {
        std::set<std::string> named;
        std::size_t maxIndex = 0;
        for (const auto& row : readJsonLines(truthPath)) {
            if (!row.contains("id") || !row.contains("label")) throw SchemaError("truth rows need id and label");
            truthRows[row.at("id").get<std::string>()] = row.at("label");
            if (row.at("label").is_string()) named.insert(row.at("label").get<std::string>());
            if (row.at("label").is_number_integer()) maxIndex = std::max(maxIndex, row.at("label").get<std::size_t>());
        }
        if (!named.empty()) {
            space.names.assign(named.begin(), named.end());
        } else {
            for (std::size_t c = 0; c <= std::max<std::size_t>(maxIndex, 1); ++c) space.names.push_back(std::to_string(c));
        }
    }
    const std::size_t classes = space.names.size();

    std::vector<std::size_t> truth, predicted;
    std::vector<std::vector<double>> scores;
    std::size_t row = 0;
    for (const auto& p : readJsonLines(predPath)) {
        const std::string where = predPath + " row " + std::to_string(++row);
        if (!p.contains("id") || !p.contains("prediction")) throw SchemaError(where + ": needs id and prediction");
        const auto id = p.at("id").get<std::string>();
        const auto t = truthRows.find(id);
        if (t == truthRows.end()) throw SchemaError(where + ": no truth for id '" + id + "'");
        truth.push_back(space.index(t->second, "truth for " + id));
        predicted.push_back(space.index(p.at("prediction"), where));
        std::vector<double> s(classes, 0.0);
        const char* key = p.contains("fused") ? "fused" : (p.contains("scores") ? "scores" : nullptr);
        if (key) {
            s = p.at(key).get<std::vector<double>>();
            if (s.size() != classes) throw SchemaError(where + ": score vector has the wrong length");
        } else {
            s[predicted.back()] = 1.0;
        }
        scores.push_back(std::move(s));
    }
    if (truth.empty()) throw ContractError("no predictions in " + predPath);
    const auto report = eval::evaluate(truth, predicted, scores, classes);
    auto doc = eval::toJson(report);
    doc["labels"] = space.names;
    out << doc.dump(2) << "\n";
    return kOk;
}

// -- gradcheck -----------------------------------------------------------

int gradcheck(const std::string& configPath, std::ostream& out) {
    encoder::GradCheckOptions o;
    if (!configPath.empty()) {
        const auto doc = readJson(configPath);
        static const std::set<std::string> known = {"configurations", "seed", "step", "rel_tol", "abs_tol",
                                                    "max_redraws"};
        for (const auto& [key, _] : doc.items()) {
            if (!known.count(key)) throw InvalidConfigError("gradcheck config: unknown key '" + key + "'");
        }
        try {
            o.configurations = doc.value("configurations", o.configurations);
            o.seed = doc.value("seed", o.seed);
            o.step = doc.value("step", o.step);
            o.relTol = doc.value("rel_tol", o.relTol);
            o.absTol = doc.value("abs_tol", o.absTol);
            o.maxRedraws = doc.value("max_redraws", o.maxRedraws);
        } catch (const json::exception& e) {
            throw InvalidConfigError(std::string("gradcheck config: ") + e.what());
        }
    }
    const auto report = encoder::runGradientCheck(o);
    out << encoder::toJson(report).dump(2) << "\n";
    return report.passed() ? kOk : kValidation;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Prototype-based multimodal time series classification with an LLM refinement loop", "timexl"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

    std::string spec, outDir, dataDir, configPath, clientSpec, runDir, sampleId, modality = "time", predPath,
                                                                                 truthPath;
    std::size_t omega = 3;

    auto* synthCmd = app.add_subcommand("synth", "Generate a synthetic planted-motif dataset");
    synthCmd->add_option("--spec", spec, "Synthetic spec JSON")->required();
    synthCmd->add_option("--out", outDir, "Output dataset directory")->required();

    auto* trainCmd = app.add_subcommand("train", "Train the prototype encoder only");
    trainCmd->add_option("--data", dataDir, "Dataset directory")->required();
    trainCmd->add_option("--config", configPath, "Loop config JSON (its encoder section is used)")->required();
    trainCmd->add_option("--out", runDir, "Run directory")->required();

    auto* loopCmd = app.add_subcommand("loop", "Run the iterative refinement loop");
    loopCmd->add_option("--data", dataDir, "Dataset directory")->required();
    loopCmd->add_option("--config", configPath, "Loop config JSON")->required();
    loopCmd->add_option("--client", clientSpec, "live or scripted:<script.json>")->required();
    loopCmd->add_option("--out", runDir, "Run directory")->required();

    auto* testCmd = app.add_subcommand("test", "Run the test phase on a saved run");
    testCmd->add_option("--run", runDir, "Run directory")->required();
    testCmd->add_option("--data", dataDir, "Dataset directory (default: the one the run used)");
    testCmd->add_option("--client", clientSpec, "live or scripted:<script.json> (default: the run's client)");

    auto* explainCmd = app.add_subcommand("explain", "Show the prototype explanation of one sample");
    explainCmd->add_option("--run", runDir, "Run directory")->required();
    explainCmd->add_option("--sample", sampleId, "Sample id")->required();
    explainCmd->add_option("--omega", omega, "Number of prototype matches");
    explainCmd->add_option("--modality", modality, "time or text");
    explainCmd->add_option("--data", dataDir, "Dataset directory (default: the one the run used)");

    auto* evalCmd = app.add_subcommand("eval", "Score predictions against ground truth");
    evalCmd->add_option("--pred", predPath, "Predictions JSONL (id, prediction, optional fused/scores)")->required();
    evalCmd->add_option("--truth", truthPath, "Dataset directory or JSONL of id/label")->required();

    auto* gradCmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
    gradCmd->add_option("--config", configPath, "Options JSON (configurations, seed, step, rel_tol, abs_tol)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

    try {
        if (synthCmd->parsed()) return synth(spec, outDir, out);
        if (trainCmd->parsed()) return train(dataDir, configPath, runDir, out);
        if (loopCmd->parsed()) return loop(dataDir, configPath, clientSpec, runDir, out);
        if (testCmd->parsed()) return test(runDir, dataDir, clientSpec, out);
        if (explainCmd->parsed()) return explainCommand(runDir, sampleId, omega, modality, dataDir, out);
        if (evalCmd->parsed()) return evalCommand(predPath, truthPath, out);
        if (gradCmd->parsed()) return gradcheck(configPath, out);
    } catch (const ExternalServiceError& e) {
        err << "external service error: " << e.what() << "\n";
        return kExternal;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    return kValidation;
}

}  // namespace timexl::cli
