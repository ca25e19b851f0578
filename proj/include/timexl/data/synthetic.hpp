#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "timexl/data/dataset.hpp"

namespace timexl::data {

// Planted-motif multi-modal dataset generator.
//
// Series: Gaussian noise (stddev seriesNoise) with one class motif from that
// class's bank added at a random offset. Motifs are Hann-windowed sinusoids
// whose frequency depends on the class, so the banks are disjoint.
//
// Text: `sentences` filler sentences drawn from a neutral vocabulary. One
// sentence carries the class indicator token `hint-<label>`; with probability
// hintCorruptionRate that token names a uniformly drawn class instead (it may
// coincide with the truth). Each sentence independently receives a noise
// token with probability noiseTokenRate. With latentCue set, one extra
// sentence carries `cue-<label>-<nonce>`: it names the true class, but the
// nonce makes every cue token unique, so a bag-of-tokens embedder cannot
// learn from it while a reader that parses the token can.
struct SyntheticSpec {
    std::uint64_t seed = 7;
    std::size_t classes = 2;
    std::vector<std::string> labelNames;  // defaults to class0, class1, ...
    std::size_t channels = 2;
    std::size_t steps = 32;
    std::size_t samples = 600;
    std::size_t motifLength = 8;
    std::size_t motifsPerClass = 2;
    double motifAmplitude = 2.0;
    // Tile the motif (without its taper) over the whole series at a random
    // circular shift, so every window carries class evidence.
    bool repeatMotif = true;
    double seriesNoise = 0.5;
    std::size_t sentences = 4;
    std::size_t wordsPerSentence = 5;
    double noiseTokenRate = 0.2;
    double hintCorruptionRate = 0.0;
    bool latentCue = false;
    bool timestamps = false;

    // Continuous target = slope * amplitude + intercept + N(0, targetNoise^2),
    // with the motif amplitude drawn uniformly from [amplitudeMin, amplitudeMax].
    struct Regression {
        bool enabled = false;
        double slope = 1.0;
        double intercept = 0.0;
        double targetNoise = 0.1;
        double amplitudeMin = 0.5;
        double amplitudeMax = 2.0;
    } regression;
};

SyntheticSpec syntheticSpecFromJson(const nlohmann::json& doc);
nlohmann::json toJson(const SyntheticSpec& spec);

Dataset synthesizeDataset(const SyntheticSpec& spec);

// Class whose indicator token occurs most often in the segments; ties go to
// the smallest class index. nullopt when no indicator occurs.
std::optional<std::size_t> indicatorVote(const std::vector<std::string>& segments,
                                         const SyntheticVocabulary& vocabulary);

}  // namespace timexl::data
