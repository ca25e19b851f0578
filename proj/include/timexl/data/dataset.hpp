#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <utility>
#include <vector>

#include "json.hpp"
#include "timexl/data/sample.hpp"

namespace timexl::data {

// A dataset directory holds `samples.jsonl` (one sample document per line:
// {id, timestamp?, series: [[...] per channel], segments: [...], label, target?})
// and the sidecar `manifest.json`.
inline constexpr const char* kSamplesFile = "samples.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";

struct Dataset {
    DatasetManifest manifest;
    std::vector<MultiModalSample> samples;
};

Dataset loadDataset(const std::filesystem::path& dir);
void saveDataset(const std::filesystem::path& dir, const Dataset& dataset);

// Parses line-delimited samples and validates them against the manifest.
// Schema violations raise SchemaError naming the 1-based row and the field.
std::vector<MultiModalSample> parseSamples(std::istream& in, const DatasetManifest& manifest);

nlohmann::json toJson(const DatasetManifest& manifest);
DatasetManifest manifestFromJson(const nlohmann::json& doc);
nlohmann::json toJson(const MultiModalSample& sample);

// Assigns train/validation/test tags. Validation and test sizes are
// floor(ratio * n); training takes the remainder. Samples that all carry a
// timestamp are split chronologically; otherwise a seeded shuffle decides.
std::vector<MultiModalSample> splitDataset(std::vector<MultiModalSample> samples,
                                           const std::array<double, 3>& ratios,
                                           std::uint64_t seed);

// Per-channel mean and population standard deviation over every time step of
// the training split.
NormalizationStats fitNormalization(const std::vector<MultiModalSample>& samples);

// z-scores every series with the manifest's training statistics. Channels
// whose training deviation is below 1e-8 are only centred.
std::vector<MultiModalSample> normalize(std::vector<MultiModalSample> samples,
                                        const DatasetManifest& manifest);

}  // namespace timexl::data
