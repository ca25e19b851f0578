#include "timexl/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "timexl/error.hpp"
#include "timexl/numerics/rng.hpp"

namespace timexl::data {

using nlohmann::json;
using numerics::Tensor;

namespace {

std::string taskName(TaskKind task) {
    return task == TaskKind::regression ? "regression" : "classification";
}

TaskKind taskFromName(const std::string& name) {
    if (name == "classification") return TaskKind::classification;
    if (name == "regression") return TaskKind::regression;
    throw SchemaError("manifest: unknown task '" + name + "'");
}

[[noreturn]] void rowError(std::size_t row, const std::string& field, const std::string& why) {
    throw SchemaError("row " + std::to_string(row) + ": field '" + field + "' " + why);
}

}  // namespace

json toJson(const DatasetManifest& m) {
    json doc;
    doc["label_names"] = m.labelNames;
    doc["channels"] = m.channels;
    doc["steps"] = m.steps;
    doc["task"] = taskName(m.task);
    doc["segmentation"] = {{"policy", toString(m.segmentation.kind)},
                           {"window", m.segmentation.windowSize}};
    doc["split_ratios"] = m.splitRatios;
    if (m.normalization) {
        doc["normalization"] = {{"mean", m.normalization->mean},
                                {"stddev", m.normalization->stddev}};
    }
    if (m.vocabulary) {
        doc["vocabulary"] = {{"indicator_tokens", m.vocabulary->indicatorTokens},
                             {"noise_tokens", m.vocabulary->noiseTokens},
                             {"cue_prefix", m.vocabulary->cuePrefix}};
    }
    return doc;
}

DatasetManifest manifestFromJson(const json& doc) {
    try {
        DatasetManifest m;
        m.labelNames = doc.at("label_names").get<std::vector<std::string>>();
        m.channels = doc.at("channels").get<std::size_t>();
        m.steps = doc.at("steps").get<std::size_t>();
        m.task = taskFromName(doc.value("task", std::string("classification")));
        if (doc.contains("segmentation")) {
            const auto& seg = doc.at("segmentation");
            m.segmentation.kind = segmentationKindFromString(seg.at("policy").get<std::string>());
            m.segmentation.windowSize = seg.value("window", std::size_t{16});
        }
        if (doc.contains("split_ratios")) {
            m.splitRatios = doc.at("split_ratios").get<std::array<double, 3>>();
        }
        if (doc.contains("normalization")) {
            NormalizationStats stats;
            stats.mean = doc.at("normalization").at("mean").get<std::vector<double>>();
            stats.stddev = doc.at("normalization").at("stddev").get<std::vector<double>>();
            m.normalization = std::move(stats);
        }
        if (doc.contains("vocabulary")) {
            SyntheticVocabulary v;
            v.indicatorTokens = doc.at("vocabulary").at("indicator_tokens").get<std::vector<std::string>>();
            v.noiseTokens = doc.at("vocabulary").at("noise_tokens").get<std::vector<std::string>>();
            v.cuePrefix = doc.at("vocabulary").value("cue_prefix", std::string());
            m.vocabulary = std::move(v);
        }
        if (m.labelNames.empty()) throw SchemaError("manifest: label_names is empty");
        if (m.channels == 0 || m.steps == 0) throw SchemaError("manifest: channels and steps must be >= 1");
        const double total = m.splitRatios[0] + m.splitRatios[1] + m.splitRatios[2];
        if (std::fabs(total - 1.0) > 1e-9) throw SchemaError("manifest: split ratios must sum to 1");
        return m;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("manifest: ") + e.what());
    }
}

json toJson(const MultiModalSample& s) {
    json doc;
    doc["id"] = s.id;
    if (s.timestamp) doc["timestamp"] = *s.timestamp;
    json series = json::array();
    for (std::size_t c = 0; c < s.series.dim(0); ++c) {
        const auto row = s.series.row(c);
        series.push_back(std::vector<double>(row.begin(), row.end()));
    }
    doc["series"] = std::move(series);
    doc["segments"] = s.segments;
    doc["label"] = s.label;
    if (s.target) doc["target"] = *s.target;
    return doc;
}

std::vector<MultiModalSample> parseSamples(std::istream& in, const DatasetManifest& manifest) {
    std::vector<MultiModalSample> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            rowError(row, "<document>", std::string("is not valid JSON: ") + e.what());
        }
        if (!doc.is_object()) rowError(row, "<document>", "must be an object");

        MultiModalSample s;
        if (!doc.contains("id") || !doc["id"].is_string()) rowError(row, "id", "must be a string");
        s.id = doc["id"].get<std::string>();
        if (!ids.insert(s.id).second) rowError(row, "id", "duplicates an earlier sample");

        if (doc.contains("timestamp")) {
            if (!doc["timestamp"].is_number_integer()) rowError(row, "timestamp", "must be an integer");
            s.timestamp = doc["timestamp"].get<std::int64_t>();
        }

        if (!doc.contains("series") || !doc["series"].is_array()) rowError(row, "series", "must be an array of channels");
        const auto& series = doc["series"];
        if (series.size() != manifest.channels) {
            rowError(row, "series", "has " + std::to_string(series.size()) + " channels, manifest says " +
                                        std::to_string(manifest.channels));
        }
        s.series = Tensor({manifest.channels, manifest.steps});
        for (std::size_t c = 0; c < manifest.channels; ++c) {
            const auto& ch = series[c];
            if (!ch.is_array() || ch.size() != manifest.steps) {
                rowError(row, "series", "channel " + std::to_string(c) + " must have " +
                                            std::to_string(manifest.steps) + " values");
            }
            for (std::size_t t = 0; t < manifest.steps; ++t) {
                if (!ch[t].is_number()) rowError(row, "series", "contains a non-number");
                const double v = ch[t].get<double>();
                if (!std::isfinite(v)) rowError(row, "series", "contains a non-finite value");
                s.series.at(c, t) = v;
            }
        }

        if (!doc.contains("segments") || !doc["segments"].is_array()) rowError(row, "segments", "must be an array of strings");
        for (const auto& seg : doc["segments"]) {
            if (!seg.is_string()) rowError(row, "segments", "must contain only strings");
            s.segments.push_back(seg.get<std::string>());
        }
        if (s.segments.empty()) rowError(row, "segments", "must not be empty");

        if (!doc.contains("label") || !doc["label"].is_number_integer()) rowError(row, "label", "must be an integer class index");
        const auto label = doc["label"].get<std::int64_t>();
        if (label < 0 || static_cast<std::size_t>(label) >= manifest.classCount()) {
            rowError(row, "label", "index " + std::to_string(label) + " outside [0, " +
                                       std::to_string(manifest.classCount()) + ")");
        }
        s.label = static_cast<std::size_t>(label);

        if (doc.contains("target")) {
            if (!doc["target"].is_number()) rowError(row, "target", "must be a number");
            s.target = doc["target"].get<double>();
        } else if (manifest.task == TaskKind::regression) {
            rowError(row, "target", "is required for a regression dataset");
        }
        out.push_back(std::move(s));
    }
    if (out.empty()) throw SchemaError("no samples");
    return out;
}

Dataset loadDataset(const std::filesystem::path& dir) {
    const auto manifestPath = dir / kManifestFile;
    const auto samplesPath = dir / kSamplesFile;
    std::ifstream mf(manifestPath);
    if (!mf) throw IoError("cannot open " + manifestPath.string());
    json doc;
    try {
        mf >> doc;
    } catch (const json::parse_error& e) {
        throw SchemaError(manifestPath.string() + ": " + e.what());
    }
    Dataset ds;
    ds.manifest = manifestFromJson(doc);
    std::ifstream sf(samplesPath);
    if (!sf) throw IoError("cannot open " + samplesPath.string());
    ds.samples = parseSamples(sf, ds.manifest);
    return ds;
}

void saveDataset(const std::filesystem::path& dir, const Dataset& dataset) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream mf(dir / kManifestFile);
        if (!mf) throw IoError("cannot write " + (dir / kManifestFile).string());
        mf << toJson(dataset.manifest).dump(2) << '\n';
    }
    std::ofstream sf(dir / kSamplesFile);
    if (!sf) throw IoError("cannot write " + (dir / kSamplesFile).string());
    for (const auto& s : dataset.samples) sf << toJson(s).dump() << '\n';
}

std::vector<MultiModalSample> splitDataset(std::vector<MultiModalSample> samples,
                                           const std::array<double, 3>& ratios,
                                           std::uint64_t seed) {
    for (double r : ratios) {
        if (!(r >= 0.0 && r <= 1.0)) throw InvalidConfigError("split ratios must lie in [0, 1]");
    }
    if (std::fabs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
        throw InvalidConfigError("split ratios must sum to 1");
    }
    const std::size_t n = samples.size();
    const auto portion = [n](double r) {
        return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
    };
    const std::size_t nVal = portion(ratios[1]);
    const std::size_t nTest = portion(ratios[2]);
    if (nVal + nTest >= n || nVal == 0 || nTest == 0) {
        throw InvalidConfigError("split of " + std::to_string(n) + " samples leaves an empty split");
    }
    const std::size_t nTrain = n - nVal - nTest;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const bool chronological =
        std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.timestamp.has_value(); });
    if (chronological) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return *samples[a].timestamp < *samples[b].timestamp;
        });
    } else {
        numerics::Rng rng(seed);
        rng.shuffle(std::span<std::size_t>(order));
    }
    for (std::size_t k = 0; k < n; ++k) {
        samples[order[k]].split = k < nTrain ? Split::train
                                : k < nTrain + nVal ? Split::validation
                                                    : Split::test;
    }
    return samples;
}

NormalizationStats fitNormalization(const std::vector<MultiModalSample>& samples) {
    const auto train = selectSplit(samples, Split::train);
    if (train.empty()) throw ContractError("normalization needs at least one training sample");
    const std::size_t channels = train.front()->series.dim(0);
    NormalizationStats stats;
    stats.mean.assign(channels, 0.0);
    stats.stddev.assign(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        double total = 0.0;
        std::size_t count = 0;
        for (const auto* s : train) {
            for (double v : s->series.row(c)) total += v;
            count += s->series.dim(1);
        }
        const double mean = total / static_cast<double>(count);
        double sq = 0.0;
        for (const auto* s : train) {
            for (double v : s->series.row(c)) sq += (v - mean) * (v - mean);
        }
        stats.mean[c] = mean;
        stats.stddev[c] = std::sqrt(sq / static_cast<double>(count));
    }
    return stats;
}

std::vector<MultiModalSample> normalize(std::vector<MultiModalSample> samples,
                                        const DatasetManifest& manifest) {
    if (!manifest.normalization) throw ContractError("manifest carries no normalization statistics");
    const auto& stats = *manifest.normalization;
    for (auto& s : samples) {
        if (s.series.dim(0) != stats.mean.size()) throw ShapeError("sample " + s.id + " channel count differs from statistics");
        for (std::size_t c = 0; c < stats.mean.size(); ++c) {
            const double sd = stats.stddev[c];
            for (double& v : s.series.row(c)) {
                v -= stats.mean[c];
                if (sd >= 1e-8) v /= sd;
            }
        }
    }
    return samples;
}

}  // namespace timexl::data
