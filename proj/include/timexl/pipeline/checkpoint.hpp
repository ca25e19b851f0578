#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "timexl/data/sample.hpp"
#include "timexl/pipeline/loop.hpp"

namespace timexl::pipeline {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "timexl-checkpoint";

struct Checkpoint {
    LoopConfig config;
    data::DatasetManifest manifest;  // carries the training normalization
    std::size_t iteration = 0;
    std::optional<BestState> best;
    std::vector<IterationReport> history;
};

Checkpoint makeCheckpoint(const LoopState& state, const LoopConfig& config, const data::DatasetManifest& manifest);

// {format, version, checksum, payload}; the checksum is FNV-1a 64 over the
// compact payload dump.
nlohmann::ordered_json toJson(const Checkpoint& checkpoint);
Checkpoint checkpointFromJson(const nlohmann::ordered_json& doc);

std::string checksum(const std::string& bytes);

// Written to a temporary file and renamed into place.
void saveCheckpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
// VersionError for an unknown version, IntegrityError for a damaged file.
Checkpoint loadCheckpoint(const std::filesystem::path& path);

// Run directory layout:
//   config.json, iterations/iter_NNN.json, transcript.jsonl, checkpoint.json,
//   predictions.jsonl, report.json, report.tsv
struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path config() const { return root / "config.json"; }
    std::filesystem::path iteration(std::size_t i) const;
    std::filesystem::path transcript() const { return root / "transcript.jsonl"; }
    std::filesystem::path checkpoint() const { return root / "checkpoint.json"; }
    std::filesystem::path predictions() const { return root / "predictions.jsonl"; }
    std::filesystem::path report() const { return root / "report.json"; }
    std::filesystem::path table() const { return root / "report.tsv"; }
};

void writeText(const std::filesystem::path& path, const std::string& text);
void writeIterationReport(const RunPaths& run, const IterationReport& report);
void writePredictions(const RunPaths& run, const TestResult& result, const std::vector<std::string>& labels);

}  // namespace timexl::pipeline
