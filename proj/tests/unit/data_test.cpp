#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "timexl/data/dataset.hpp"
#include "timexl/data/embedding.hpp"
#include "timexl/data/segmentation.hpp"
#include "timexl/data/synthetic.hpp"
#include "timexl/error.hpp"

using namespace timexl;
using namespace timexl::data;
namespace fs = std::filesystem;

namespace {

fs::path scratchDir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("timexl_data_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

DatasetManifest smallManifest() {
    DatasetManifest m;
    m.labelNames = {"up", "down"};
    m.channels = 2;
    m.steps = 3;
    return m;
}

std::string row(const std::string& id, int label, const std::string& extra = "") {
    return R"({"id":")" + id + R"(","series":[[1,2,3],[4,5,6]],"segments":["A b."],"label":)" +
           std::to_string(label) + extra + "}\n";
}

std::string schemaMessage(const std::string& text, const DatasetManifest& m) {
    std::istringstream in(text);
    try {
        parseSamples(in, m);
    } catch (const SchemaError& e) {
        return e.what();
    }
    return "";
}

class CountingProvider final : public EmbeddingProvider {
public:
    std::string id() const override { return "counting"; }
    std::size_t dimension() const override { return 3; }
    std::vector<double> embed(std::string_view text) override {
        ++calls;
        seen.insert(std::string(text));
        return {static_cast<double>(text.size()), 1.0, 0.0};
    }
    int calls = 0;
    std::set<std::string> seen;
};

class FlakyProvider final : public EmbeddingProvider {
public:
    explicit FlakyProvider(int failures) : failures_(failures) {}
    std::string id() const override { return "flaky"; }
    std::size_t dimension() const override { return 1; }
    std::vector<double> embed(std::string_view) override {
        if (failures_-- > 0) throw ExternalServiceError("unavailable", true);
        return {1.0};
    }

private:
    int failures_;
};

}  // namespace

TEST(Segmentation, SentencePolicySplitsOnTerminators) {
    const auto segs = segmentText("Prices rose. Then fell! Why?  Unclear", {SegmentationKind::sentence});
    const std::vector<std::string> want = {"Prices rose.", "Then fell!", "Why?", "Unclear"};
    EXPECT_EQ(segs, want);
}

TEST(Segmentation, DecimalPointIsNotABoundary) {
    const auto segs = segmentText("Rate was 3.5 today. Done.", {SegmentationKind::sentence});
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_EQ(segs[0], "Rate was 3.5 today.");
}

TEST(Segmentation, HalfSentenceAlsoSplitsOnCommaAndSemicolon) {
    const auto segs = segmentText("Warm, humid; then rain.", {SegmentationKind::halfSentence});
    const std::vector<std::string> want = {"Warm,", "humid;", "then rain."};
    EXPECT_EQ(segs, want);
}

TEST(Segmentation, FixedWindowGroupsTokens) {
    const auto segs = segmentText("a b c d e", {SegmentationKind::fixedTokenWindow, 2});
    const std::vector<std::string> want = {"a b", "c d", "e"};
    EXPECT_EQ(segs, want);
}

TEST(Segmentation, PunctuationOnlySegmentsAreDropped) {
    const auto segs = segmentText("Fine. ... !", {SegmentationKind::sentence});
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_EQ(segs[0], "Fine.");
}

TEST(Segmentation, EmptyTextIsAContractError) {
    EXPECT_THROW(segmentText("", {}), ContractError);
    EXPECT_THROW(segmentText("   ", {}), ContractError);
}

TEST(Segmentation, KindNamesRoundTrip) {
    for (auto k : {SegmentationKind::sentence, SegmentationKind::halfSentence, SegmentationKind::fixedTokenWindow}) {
        EXPECT_EQ(segmentationKindFromString(toString(k)), k);
    }
    EXPECT_THROW(segmentationKindFromString("paragraph"), InvalidConfigError);
}

TEST(Schema, ValidRowsParse) {
    std::istringstream in(row("a", 0) + row("b", 1, R"(,"timestamp":5)"));
    const auto samples = parseSamples(in, smallManifest());
    ASSERT_EQ(samples.size(), 2u);
    EXPECT_EQ(samples[1].timestamp, 5);
    EXPECT_DOUBLE_EQ(samples[0].series.at(1, 2), 6.0);
}

TEST(Schema, ErrorsNameRowAndField) {
    const auto m = smallManifest();
    EXPECT_NE(schemaMessage(row("a", 0) + row("a", 1), m).find("row 2: field 'id'"), std::string::npos);
    EXPECT_NE(schemaMessage(row("a", 0) + row("b", 0) + row("c", 7), m).find("row 3: field 'label'"),
              std::string::npos);
    EXPECT_NE(schemaMessage(R"({"id":"x","series":[[1,2,3]],"segments":["a"],"label":0})", m).find("field 'series'"),
              std::string::npos);
    EXPECT_NE(schemaMessage(R"({"id":"x","series":[[1,2],[3,4]],"segments":["a"],"label":0})", m).find("field 'series'"),
              std::string::npos);
    EXPECT_NE(schemaMessage(R"({"id":"x","series":[[1,2,3],[4,5,6]],"segments":[],"label":0})", m).find("field 'segments'"),
              std::string::npos);
    EXPECT_NE(schemaMessage("{not json}\n", m).find("row 1"), std::string::npos);
}

TEST(Schema, RegressionRequiresTarget) {
    auto m = smallManifest();
    m.task = TaskKind::regression;
    EXPECT_NE(schemaMessage(row("a", 0), m).find("field 'target'"), std::string::npos);
    std::istringstream in(row("a", 0, R"(,"target":1.5)"));
    EXPECT_DOUBLE_EQ(*parseSamples(in, m)[0].target, 1.5);
}

TEST(Schema, EmptyInputIsRejected) {
    EXPECT_EQ(schemaMessage("\n\n", smallManifest()), "no samples");
}

TEST(Dataset, SaveLoadRoundTrip) {
    SyntheticSpec spec;
    spec.samples = 12;
    spec.timestamps = true;
    const auto ds = synthesizeDataset(spec);
    const auto dir = scratchDir("roundtrip");
    saveDataset(dir, ds);
    const auto back = loadDataset(dir);
    ASSERT_EQ(back.samples.size(), ds.samples.size());
    EXPECT_EQ(back.manifest.labelNames, ds.manifest.labelNames);
    ASSERT_TRUE(back.manifest.vocabulary);
    EXPECT_EQ(back.manifest.vocabulary->indicatorTokens, ds.manifest.vocabulary->indicatorTokens);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        EXPECT_EQ(back.samples[i].id, ds.samples[i].id);
        EXPECT_EQ(back.samples[i].segments, ds.samples[i].segments);
        EXPECT_EQ(back.samples[i].label, ds.samples[i].label);
        EXPECT_EQ(back.samples[i].timestamp, ds.samples[i].timestamp);
        EXPECT_TRUE(back.samples[i].series.identical(ds.samples[i].series));
    }
}

TEST(Dataset, MissingDirectoryIsAnIoError) {
    EXPECT_THROW(loadDataset(scratchDir("missing") / "nope"), IoError);
}

TEST(Split, SizesFollowFloorOfRatios) {
    SyntheticSpec spec;
    spec.samples = 10;
    auto samples = splitDataset(synthesizeDataset(spec).samples, {0.6, 0.2, 0.2}, 3);
    EXPECT_EQ(selectSplit(samples, Split::train).size(), 6u);
    EXPECT_EQ(selectSplit(samples, Split::validation).size(), 2u);
    EXPECT_EQ(selectSplit(samples, Split::test).size(), 2u);

    spec.samples = 13;
    samples = splitDataset(synthesizeDataset(spec).samples, {0.6, 0.2, 0.2}, 3);
    EXPECT_EQ(selectSplit(samples, Split::validation).size(), 2u);
    EXPECT_EQ(selectSplit(samples, Split::test).size(), 2u);
    EXPECT_EQ(selectSplit(samples, Split::train).size(), 9u);
}

TEST(Split, TimestampedDataIsSplitChronologically) {
    SyntheticSpec spec;
    spec.samples = 20;
    spec.timestamps = true;
    auto samples = synthesizeDataset(spec).samples;
    std::reverse(samples.begin(), samples.end());
    samples = splitDataset(std::move(samples), {0.6, 0.2, 0.2}, 1);
    std::int64_t lastTrain = -1, firstVal = 1000, lastVal = -1, firstTest = 1000;
    for (const auto& s : samples) {
        const auto t = *s.timestamp;
        if (s.split == Split::train) lastTrain = std::max(lastTrain, t);
        if (s.split == Split::validation) firstVal = std::min(firstVal, t), lastVal = std::max(lastVal, t);
        if (s.split == Split::test) firstTest = std::min(firstTest, t);
    }
    EXPECT_LT(lastTrain, firstVal);
    EXPECT_LT(lastVal, firstTest);
}

TEST(Split, SeededShuffleIsDeterministic) {
    SyntheticSpec spec;
    spec.samples = 30;
    const auto base = synthesizeDataset(spec).samples;
    const auto a = splitDataset(base, {0.6, 0.2, 0.2}, 11);
    const auto b = splitDataset(base, {0.6, 0.2, 0.2}, 11);
    const auto c = splitDataset(base, {0.6, 0.2, 0.2}, 12);
    bool differs = false;
    for (std::size_t i = 0; i < base.size(); ++i) {
        EXPECT_EQ(a[i].split, b[i].split);
        differs |= a[i].split != c[i].split;
    }
    EXPECT_TRUE(differs);
}

TEST(Split, DegenerateRatiosAreRejected) {
    SyntheticSpec spec;
    spec.samples = 4;
    const auto base = synthesizeDataset(spec).samples;
    EXPECT_THROW(splitDataset(base, {0.6, 0.2, 0.2}, 1), InvalidConfigError);
    EXPECT_THROW(splitDataset(base, {0.5, 0.2, 0.2}, 1), InvalidConfigError);
}

TEST(Normalization, UsesTrainingStatisticsOnly) {
    SyntheticSpec spec;
    spec.samples = 20;
    auto samples = splitDataset(synthesizeDataset(spec).samples, {0.6, 0.2, 0.2}, 5);
    const auto before = fitNormalization(samples);
    for (auto& s : samples) {
        if (s.split != Split::train) s.series.fill(1e6);
    }
    const auto after = fitNormalization(samples);
    EXPECT_EQ(before.mean, after.mean);
    EXPECT_EQ(before.stddev, after.stddev);

    // Oracle: plain two-pass statistics over channel 0 of the training rows.
    double sum = 0, count = 0;
    for (const auto& s : samples)
        if (s.split == Split::train)
            for (std::size_t t = 0; t < s.series.dim(1); ++t) sum += s.series.at(0, t), ++count;
    const double mean = sum / count;
    double var = 0;
    for (const auto& s : samples)
        if (s.split == Split::train)
            for (std::size_t t = 0; t < s.series.dim(1); ++t) var += std::pow(s.series.at(0, t) - mean, 2);
    EXPECT_NEAR(after.mean[0], mean, 1e-12);
    EXPECT_NEAR(after.stddev[0], std::sqrt(var / count), 1e-12);
}

TEST(Normalization, ConstantChannelIsOnlyCentred) {
    auto m = smallManifest();
    m.normalization = NormalizationStats{{2.0, 5.0}, {0.0, 2.0}};
    MultiModalSample s;
    s.id = "x";
    s.series = numerics::Tensor::matrix(2, 3, {2, 2, 2, 3, 5, 7});
    const auto out = normalize({s}, m);
    for (std::size_t t = 0; t < 3; ++t) {
        EXPECT_EQ(out[0].series.at(0, t), 0.0);
        EXPECT_TRUE(std::isfinite(out[0].series.at(0, t)));
    }
    EXPECT_DOUBLE_EQ(out[0].series.at(1, 0), -1.0);
    EXPECT_DOUBLE_EQ(out[0].series.at(1, 2), 1.0);
}

TEST(Normalization, RequiresStatistics) {
    EXPECT_THROW(normalize({}, smallManifest()), ContractError);
}

TEST(Embedding, TokenizeLowercasesAndStripsOuterPunctuation) {
    const std::vector<std::string> want = {"the", "hint-up", "rose", "don't"};
    EXPECT_EQ(tokenize("The (hint-up) rose. don't"), want);
}

TEST(Embedding, HashingEmbedderIsUnitNormAndDeterministic) {
    HashingEmbedder e(32);
    const auto a = e.embed("Rain is likely today.");
    const auto b = e.embed("rain is LIKELY today");
    ASSERT_EQ(a.size(), 32u);
    double norm = 0;
    for (double v : a) norm += v * v;
    EXPECT_NEAR(norm, 1.0, 1e-12);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, e.embed("Sunny skies."));
    EXPECT_EQ(e.calls(), 3u);
}

TEST(Embedding, CacheCallsProviderOncePerDistinctText) {
    CountingProvider p;
    EmbeddingCache cache;
    std::vector<MultiModalSample> samples(3);
    samples[0].segments = {"a.", "b."};
    samples[1].segments = {"b.", "c."};
    samples[2].segments = {"a.", "a."};
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i].id = "s" + std::to_string(i);
    embedSegments(p, samples, cache);
    EXPECT_EQ(p.calls, 3);
    EXPECT_EQ(cache.size(), 3u);
    for (const auto& s : samples) {
        ASSERT_TRUE(s.embedded());
        EXPECT_EQ(s.embeddings.dim(0), 3u);
    }
    embedSegments(p, samples, cache);
    EXPECT_EQ(p.calls, 3);
}

TEST(Embedding, CachePersistsAcrossInstances) {
    const auto file = scratchDir("cache") / "embeddings.log";
    HashingEmbedder e(8);
    std::vector<MultiModalSample> samples(1);
    samples[0].id = "x";
    samples[0].segments = {"first one.", "second one."};
    {
        EmbeddingCache cache(file);
        embedSegments(e, samples, cache);
    }
    EXPECT_EQ(e.calls(), 2u);
    const auto first = samples[0].embeddings;
    EmbeddingCache reopened(file);
    EXPECT_EQ(reopened.size(), 2u);
    embedSegments(e, samples, reopened);
    EXPECT_EQ(e.calls(), 2u);
    EXPECT_TRUE(samples[0].embeddings.identical(first));
}

TEST(Embedding, CacheRejectsForeignAndNewerFiles) {
    const auto dir = scratchDir("cachebad");
    {
        std::ofstream(dir / "foreign") << "hello world\n";
        std::ofstream(dir / "newer") << "timexl-embedding-cache 99\n";
    }
    EXPECT_THROW(EmbeddingCache(dir / "foreign"), IntegrityError);
    EXPECT_THROW(EmbeddingCache(dir / "newer"), VersionError);
}

TEST(Embedding, CacheKeyDependsOnProvider) {
    EXPECT_NE(EmbeddingCache::key("a", "text"), EmbeddingCache::key("b", "text"));
    EXPECT_EQ(EmbeddingCache::key("a", "text"), EmbeddingCache::key("a", "text"));
}

TEST(Embedding, TransientProviderFailuresAreRetried) {
    MultiModalSample s;
    s.id = "x";
    s.segments = {"a."};
    EmbeddingCache cache;
    FlakyProvider ok(2);
    embedSample(ok, cache, s, 2);
    EXPECT_TRUE(s.embedded());

    EmbeddingCache cache2;
    FlakyProvider bad(3);
    EXPECT_THROW(embedSample(bad, cache2, s, 2), ExternalServiceError);
}

TEST(Synthetic, SameSeedSameDataset) {
    SyntheticSpec spec;
    spec.samples = 40;
    spec.latentCue = true;
    const auto a = synthesizeDataset(spec);
    const auto b = synthesizeDataset(spec);
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        EXPECT_EQ(a.samples[i].segments, b.samples[i].segments);
        EXPECT_TRUE(a.samples[i].series.identical(b.samples[i].series));
    }
    spec.seed += 1;
    EXPECT_NE(synthesizeDataset(spec).samples[0].segments, a.samples[0].segments);
}

TEST(Synthetic, LabelsAreBalanced) {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.samples = 31;
    std::map<std::size_t, int> counts;
    for (const auto& s : synthesizeDataset(spec).samples) ++counts[s.label];
    ASSERT_EQ(counts.size(), 3u);
    for (const auto& [label, n] : counts) EXPECT_TRUE(n == 10 || n == 11) << label;
}

TEST(Synthetic, InvalidSpecsAreRejected) {
    SyntheticSpec spec;
    spec.motifLength = spec.steps + 1;
    EXPECT_THROW(synthesizeDataset(spec), InvalidConfigError);
    spec = {};
    spec.classes = 1;
    EXPECT_THROW(synthesizeDataset(spec), InvalidConfigError);
    spec = {};
    spec.labelNames = {"two words", "b"};
    EXPECT_THROW(synthesizeDataset(spec), InvalidConfigError);
}

TEST(Synthetic, EveryTextCarriesExactlyOneIndicator) {
    SyntheticSpec spec;
    spec.samples = 50;
    spec.hintCorruptionRate = 0.0;
    const auto ds = synthesizeDataset(spec);
    for (const auto& s : ds.samples) {
        int hits = 0;
        for (const auto& seg : s.segments)
            for (const auto& tok : tokenize(seg))
                hits += tok.rfind("hint-", 0) == 0;
        EXPECT_EQ(hits, 1);
        EXPECT_EQ(indicatorVote(s.segments, *ds.manifest.vocabulary), s.label);
    }
}

TEST(Synthetic, IndicatorAccuracyTracksCorruptionRate) {
    SyntheticSpec spec;
    spec.classes = 4;
    spec.samples = 5000;
    spec.hintCorruptionRate = 0.4;
    const auto ds = synthesizeDataset(spec);
    std::size_t correct = 0;
    for (const auto& s : ds.samples) correct += indicatorVote(s.segments, *ds.manifest.vocabulary) == s.label;
    const double expected = 1.0 - 0.4 * 3.0 / 4.0;
    EXPECT_NEAR(static_cast<double>(correct) / 5000.0, expected, 0.03);
}

TEST(Synthetic, LatentCueNamesTheTrueClass) {
    SyntheticSpec spec;
    spec.samples = 30;
    spec.latentCue = true;
    spec.hintCorruptionRate = 1.0;
    const auto ds = synthesizeDataset(spec);
    std::set<std::string> cues;
    for (const auto& s : ds.samples) {
        std::string cue;
        for (const auto& seg : s.segments)
            for (const auto& tok : tokenize(seg))
                if (tok.rfind("cue-", 0) == 0) cue = tok;
        ASSERT_FALSE(cue.empty());
        EXPECT_EQ(cue.rfind("cue-" + ds.manifest.labelNames[s.label] + "-", 0), 0u);
        cues.insert(cue);
    }
    EXPECT_EQ(cues.size(), ds.samples.size());
}

TEST(Synthetic, RegressionTargetsFollowAmplitude) {
    SyntheticSpec spec;
    spec.samples = 400;
    spec.seriesNoise = 0.0;
    spec.regression.enabled = true;
    spec.regression.slope = 2.0;
    spec.regression.intercept = 1.0;
    spec.regression.targetNoise = 0.0;
    const auto ds = synthesizeDataset(spec);
    EXPECT_EQ(ds.manifest.task, TaskKind::regression);
    double lo = 1e9, hi = -1e9;
    for (const auto& s : ds.samples) {
        ASSERT_TRUE(s.target);
        lo = std::min(lo, *s.target);
        hi = std::max(hi, *s.target);
    }
    EXPECT_GE(lo, 2.0 * 0.5 + 1.0 - 1e-12);
    EXPECT_LE(hi, 2.0 * 2.0 + 1.0 + 1e-12);
    EXPECT_GT(hi - lo, 2.0);
}

TEST(Synthetic, SpecJsonRoundTrip) {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.latentCue = true;
    spec.regression.enabled = true;
    spec.regression.slope = 3.0;
    const auto back = syntheticSpecFromJson(toJson(spec));
    EXPECT_EQ(back.classes, 3u);
    EXPECT_TRUE(back.latentCue);
    EXPECT_TRUE(back.regression.enabled);
    EXPECT_DOUBLE_EQ(back.regression.slope, 3.0);
    EXPECT_THROW(syntheticSpecFromJson(nlohmann::json{{"classes", "many"}}), InvalidConfigError);
}
