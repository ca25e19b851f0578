#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "timexl/data/sample.hpp"
#include "timexl/encoder/config.hpp"
#include "timexl/numerics/rng.hpp"
#include "timexl/numerics/tensor.hpp"

namespace timexl::encoder {

using numerics::Tensor;

enum class Modality { time, text };

std::string toString(Modality modality);
Modality modalityFromString(const std::string& name);

// Training segment a prototype was projected onto.
struct Provenance {
    std::string sampleId;
    std::size_t segment = 0;
    Modality modality = Modality::time;
    std::size_t classIndex = 0;
    std::string text;   // text modality: the w' joined source segments
    Tensor window;      // time modality: channels x w slice of the source series
};

// Prototype rows are grouped by class: row c * k + i is prototype i of class c.
struct EncoderModel {
    EncoderConfig config;

    Tensor timeKernels;     // h x N x w
    Tensor timeBias;        // h
    Tensor textKernels;     // h' x d x w'
    Tensor textBias;        // h'
    Tensor timePointKernels;  // h x h x 1 (pointwise only)
    Tensor timePointBias;
    Tensor textPointKernels;  // h' x h' x 1 (pointwise only)
    Tensor textPointBias;

    Tensor timePrototypes;  // kC x h
    Tensor textPrototypes;  // k'C x h'
    Tensor fusion;          // C x (kC + k'C), non-negative

    Tensor headWeights;     // h, non-negative (regression only)
    Tensor headBias;        // scalar (regression only)

    bool projected = false;
    std::vector<Provenance> timeProvenance;
    std::vector<Provenance> textProvenance;

    // Stable (name, tensor) list of every trainable parameter.
    std::vector<std::pair<std::string, Tensor*>> parameters();
    std::vector<std::pair<std::string, const Tensor*>> parameters() const;

    std::size_t prototypeClass(Modality modality, std::size_t row) const;
};

// Seeded initialization: conv weights ~ N(0, 1/sqrt(fan-in)), zero biases,
// fusion weight 1 from each prototype to its own class and 0 elsewhere.
// Prototypes are zero until initializePrototypes runs.
EncoderModel initializeModel(const EncoderConfig& config, numerics::Rng& rng);

// Sets every prototype to the representation of a randomly drawn segment of
// a training sample of its class.
void initializePrototypes(EncoderModel& model, std::span<const data::MultiModalSample* const> train,
                          numerics::Rng& rng);

// Column j is the representation of segment j.
Tensor encodeTime(const Tensor& series, const EncoderModel& model);
Tensor encodeText(const Tensor& embeddings, const EncoderModel& model);

struct Similarities {
    Tensor full;                      // prototypes x segments, exp(-|p - z|^2)
    std::vector<double> maxima;       // per prototype
    std::vector<std::size_t> argmax;  // per prototype, smallest segment on ties
};

Similarities prototypeSimilarities(const Tensor& reps, const Tensor& prototypes);

struct Classification {
    std::vector<double> logits;
    std::vector<double> probabilities;
};

Classification classify(std::span<const double> simTime, std::span<const double> simText,
                        const Tensor& fusion);

struct ForwardTrace {
    Tensor zTime;
    Tensor zText;
    Similarities time;
    Similarities text;
    std::vector<double> logits;
    std::vector<double> probabilities;
};

ForwardTrace forward(const data::MultiModalSample& sample, const EncoderModel& model);

// Reconstructs each time segment from the prototypes (weights: softmax of its
// similarities down the prototype axis), mean-pools and applies the head.
double regressionForward(const Tensor& zTime, const EncoderModel& model);

// Replaces every prototype with its nearest same-class training segment
// representation. Ties go to the smallest sample id, then segment index.
void projectPrototypes(EncoderModel& model, std::span<const data::MultiModalSample* const> train);

struct ExplanationItem {
    std::size_t classIndex = 0;
    std::size_t prototype = 0;    // index within its class
    std::size_t segment = 0;      // matched input segment
    double score = 0.0;
    std::string segmentText;      // text modality
    Tensor segmentWindow;         // time modality
    Provenance provenance;
};

struct Explanation {
    Modality modality = Modality::time;
    std::vector<ExplanationItem> items;  // descending score
};

Explanation explain(const data::MultiModalSample& sample, const EncoderModel& model, std::size_t omega,
                    Modality modality);

// Plain-text rendering used inside prompts and by the CLI.
std::string describe(const ExplanationItem& item, const std::vector<std::string>& labelNames);

nlohmann::json toJson(const EncoderModel& model);
EncoderModel modelFromJson(const nlohmann::json& doc);

}  // namespace timexl::encoder
