#include "timexl/pipeline/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "timexl/data/dataset.hpp"
#include "timexl/error.hpp"
#include "timexl/numerics/rng.hpp"

namespace timexl::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace fs = std::filesystem;

namespace {

ordered_json bestJson(const BestState& b) {
    ordered_json doc;
    doc["iteration"] = b.iteration;
    doc["alpha"] = b.alpha;
    doc["fused_f1"] = b.fusedF1;
    doc["fused_auc"] = b.fusedAuc;
    doc["reflection"] = agents::toJson(b.reflection);
    doc["model"] = encoder::toJson(b.model);
    return doc;
}

BestState bestFromJson(const json& doc) {
    BestState b;
    b.iteration = doc.at("iteration").get<std::size_t>();
    b.alpha = doc.at("alpha").get<double>();
    b.fusedF1 = doc.at("fused_f1").get<double>();
    b.fusedAuc = doc.at("fused_auc").get<double>();
    b.reflection = agents::reflectionStateFromJson(doc.at("reflection"));
    b.model = encoder::modelFromJson(doc.at("model"));
    return b;
}

}  // namespace

Checkpoint makeCheckpoint(const LoopState& state, const LoopConfig& config, const data::DatasetManifest& manifest) {
    return {config, manifest, state.iteration, state.best, state.history};
}

std::string checksum(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(numerics::hashString(bytes)));
    return buf;
}

ordered_json toJson(const Checkpoint& c) {
    ordered_json payload;
    payload["config"] = toJson(c.config);
    payload["manifest"] = data::toJson(c.manifest);
    payload["iteration"] = c.iteration;
    payload["best"] = c.best ? bestJson(*c.best) : ordered_json(nullptr);
    payload["history"] = ordered_json::array();
    for (const auto& r : c.history) payload["history"].push_back(toJson(r));
    ordered_json doc;
    doc["format"] = kCheckpointFormat;
    doc["version"] = kCheckpointVersion;
    doc["checksum"] = checksum(payload.dump());
    doc["payload"] = std::move(payload);
    return doc;
}

Checkpoint checkpointFromJson(const ordered_json& doc) {
    if (!doc.is_object() || doc.value("format", std::string()) != kCheckpointFormat) {
        throw IntegrityError("not a checkpoint document");
    }
    if (!doc.contains("version") || !doc.at("version").is_number_integer()) {
        throw IntegrityError("checkpoint has no version");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
        throw VersionError("checkpoint format version " + std::to_string(version) +
                           " is not supported; this build reads version " + std::to_string(kCheckpointVersion));
    }
    if (!doc.contains("payload") || !doc.contains("checksum") || !doc.at("checksum").is_string()) {
        throw IntegrityError("checkpoint is missing its payload or checksum");
    }
    const auto& payload = doc.at("payload");
    if (checksum(payload.dump()) != doc.at("checksum").get<std::string>()) {
        throw IntegrityError("checkpoint checksum mismatch");
    }
    try {
        Checkpoint c;
        c.config = loopConfigFromJson(json::parse(payload.at("config").dump()));
        c.manifest = data::manifestFromJson(json::parse(payload.at("manifest").dump()));
        c.iteration = payload.at("iteration").get<std::size_t>();
        if (!payload.at("best").is_null()) c.best = bestFromJson(json::parse(payload.at("best").dump()));
        for (const auto& r : payload.at("history")) c.history.push_back(iterationReportFromJson(json::parse(r.dump())));
        return c;
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("checkpoint payload: ") + e.what());
    } catch (const SchemaError& e) {
        throw IntegrityError(std::string("checkpoint payload: ") + e.what());
    } catch (const InvalidConfigError& e) {
        throw IntegrityError(std::string("checkpoint payload: ") + e.what());
    }
}

void writeText(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out << text;
        if (!out) throw IoError("failed writing " + path.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

void saveCheckpoint(const Checkpoint& checkpoint, const fs::path& path) {
    writeText(path, toJson(checkpoint).dump(2) + "\n");
}

Checkpoint loadCheckpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    ordered_json doc;
    try {
        doc = ordered_json::parse(buffer.str());
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    return checkpointFromJson(doc);
}

fs::path RunPaths::iteration(std::size_t i) const {
    char name[32];
    std::snprintf(name, sizeof name, "iter_%03zu.json", i);
    return root / "iterations" / name;
}

void writeIterationReport(const RunPaths& run, const IterationReport& report) {
    writeText(run.iteration(report.iteration), toJson(report).dump(2) + "\n");
}

void writePredictions(const RunPaths& run, const TestResult& result, const std::vector<std::string>& labels) {
    std::string text;
    for (const auto& r : result.records) text += toJson(r, labels).dump() + "\n";
    writeText(run.predictions(), text);
}

}  // namespace timexl::pipeline
