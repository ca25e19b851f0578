#include "timexl/encoder/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "timexl/error.hpp"
#include "timexl/numerics/kernels.hpp"

namespace timexl::encoder {

using data::MultiModalSample;
using nlohmann::json;
using numerics::Activation;
using numerics::Rng;

namespace {

Tensor gaussianTensor(std::vector<std::size_t> shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = stddev * rng.gaussian();
    return t;
}

std::vector<const MultiModalSample*> ofClass(std::span<const MultiModalSample* const> samples, std::size_t c) {
    std::vector<const MultiModalSample*> out;
    for (const auto* s : samples) {
        if (s->label == c) out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
    return out;
}

const Tensor& prototypesOf(const EncoderModel& m, Modality modality) {
    return modality == Modality::time ? m.timePrototypes : m.textPrototypes;
}

Tensor representations(const MultiModalSample& s, const EncoderModel& m, Modality modality) {
    if (modality == Modality::time) return encodeTime(s.series, m);
    if (!s.embedded()) throw ContractError("sample " + s.id + " has no segment embeddings");
    return encodeText(s.embeddings, m);
}

Tensor seriesWindow(const Tensor& series, std::size_t start, std::size_t width) {
    Tensor w({series.dim(0), width});
    for (std::size_t c = 0; c < series.dim(0); ++c) {
        for (std::size_t u = 0; u < width; ++u) w.at(c, u) = series.at(c, start + u);
    }
    return w;
}

Provenance provenanceFor(const MultiModalSample& s, std::size_t segment, Modality modality,
                         std::size_t classIndex, const EncoderConfig& cfg) {
    Provenance p;
    p.sampleId = s.id;
    p.segment = segment;
    p.modality = modality;
    p.classIndex = classIndex;
    if (modality == Modality::time) {
        p.window = seriesWindow(s.series, segment, cfg.timeKernel);
    } else {
        p.text = data::joinSegments(s.segments, segment, cfg.textKernel);
    }
    return p;
}

json tensorJson(const Tensor& t) {
    return json{{"shape", t.shape()}, {"values", t.data()}};
}

Tensor tensorFromJson(const json& doc) {
    return Tensor(doc.at("shape").get<std::vector<std::size_t>>(), doc.at("values").get<std::vector<double>>());
}

json provenanceJson(const Provenance& p) {
    json doc{{"sample_id", p.sampleId},
             {"segment", p.segment},
             {"modality", toString(p.modality)},
             {"class", p.classIndex}};
    if (p.modality == Modality::time) {
        doc["window"] = tensorJson(p.window);
    } else {
        doc["text"] = p.text;
    }
    return doc;
}

Provenance provenanceFromJson(const json& doc) {
    Provenance p;
    p.sampleId = doc.at("sample_id").get<std::string>();
    p.segment = doc.at("segment").get<std::size_t>();
    p.modality = modalityFromString(doc.at("modality").get<std::string>());
    p.classIndex = doc.at("class").get<std::size_t>();
    if (doc.contains("window")) p.window = tensorFromJson(doc.at("window"));
    if (doc.contains("text")) p.text = doc.at("text").get<std::string>();
    return p;
}

}  // namespace

std::string toString(Modality modality) {
    return modality == Modality::time ? "time" : "text";
}

Modality modalityFromString(const std::string& name) {
    if (name == "time") return Modality::time;
    if (name == "text") return Modality::text;
    throw InvalidConfigError("unknown modality '" + name + "' (expected time or text)");
}

std::vector<std::pair<std::string, Tensor*>> EncoderModel::parameters() {
    std::vector<std::pair<std::string, Tensor*>> out = {
        {"time.kernels", &timeKernels}, {"time.bias", &timeBias},
        {"text.kernels", &textKernels}, {"text.bias", &textBias}};
    if (config.pointwise) {
        out.insert(out.end(), {{"time.pointwise.kernels", &timePointKernels},
                               {"time.pointwise.bias", &timePointBias},
                               {"text.pointwise.kernels", &textPointKernels},
                               {"text.pointwise.bias", &textPointBias}});
    }
    out.insert(out.end(), {{"prototypes.time", &timePrototypes},
                           {"prototypes.text", &textPrototypes},
                           {"fusion", &fusion}});
    if (config.regression) {
        out.insert(out.end(), {{"head.weights", &headWeights}, {"head.bias", &headBias}});
    }
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> EncoderModel::parameters() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (const auto& [name, t] : const_cast<EncoderModel*>(this)->parameters()) out.emplace_back(name, t);
    return out;
}

std::size_t EncoderModel::prototypeClass(Modality modality, std::size_t row) const {
    const std::size_t k = modality == Modality::time ? config.timePrototypes : config.textPrototypes;
    return row / k;
}

EncoderModel initializeModel(const EncoderConfig& config, Rng& rng) {
    config.validate();
    EncoderModel m;
    m.config = config;
    const auto& c = config;
    m.timeKernels = gaussianTensor({c.timeFeatures, c.channels, c.timeKernel},
                                   1.0 / std::sqrt(static_cast<double>(c.channels * c.timeKernel)), rng);
    m.timeBias = Tensor({c.timeFeatures});
    m.textKernels = gaussianTensor({c.textFeatures, c.embeddingDim, c.textKernel},
                                   1.0 / std::sqrt(static_cast<double>(c.embeddingDim * c.textKernel)), rng);
    m.textBias = Tensor({c.textFeatures});
    if (c.pointwise) {
        m.timePointKernels = gaussianTensor({c.timeFeatures, c.timeFeatures, 1},
                                            1.0 / std::sqrt(static_cast<double>(c.timeFeatures)), rng);
        m.timePointBias = Tensor({c.timeFeatures});
        m.textPointKernels = gaussianTensor({c.textFeatures, c.textFeatures, 1},
                                            1.0 / std::sqrt(static_cast<double>(c.textFeatures)), rng);
        m.textPointBias = Tensor({c.textFeatures});
    }
    m.timePrototypes = Tensor({c.totalTimePrototypes(), c.timeFeatures});
    m.textPrototypes = Tensor({c.totalTextPrototypes(), c.textFeatures});

    const std::size_t kt = c.totalTimePrototypes();
    m.fusion = Tensor({c.classes, kt + c.totalTextPrototypes()});
    for (std::size_t r = 0; r < kt; ++r) m.fusion.at(r / c.timePrototypes, r) = 1.0;
    for (std::size_t r = 0; r < c.totalTextPrototypes(); ++r) m.fusion.at(r / c.textPrototypes, kt + r) = 1.0;

    if (c.regression) {
        m.headWeights = gaussianTensor({c.timeFeatures}, 1.0 / std::sqrt(static_cast<double>(c.timeFeatures)), rng);
        for (double& v : m.headWeights.values()) v = std::fabs(v);
        m.headBias = Tensor::scalar(0.0);
    }
    return m;
}

void initializePrototypes(EncoderModel& model, std::span<const MultiModalSample* const> train, Rng& rng) {
    for (Modality modality : {Modality::time, Modality::text}) {
        Tensor& protos = modality == Modality::time ? model.timePrototypes : model.textPrototypes;
        const std::size_t k = modality == Modality::time ? model.config.timePrototypes : model.config.textPrototypes;
        for (std::size_t c = 0; c < model.config.classes; ++c) {
            const auto members = ofClass(train, c);
            if (members.empty()) {
                throw ProjectionError("class " + std::to_string(c) + " has no training samples");
            }
            for (std::size_t i = 0; i < k; ++i) {
                const auto* s = members[rng.below(members.size())];
                const Tensor z = representations(*s, model, modality);
                const std::size_t j = rng.below(z.dim(1));
                for (std::size_t r = 0; r < z.dim(0); ++r) protos.at(c * k + i, r) = z.at(r, j);
            }
        }
    }
    model.projected = false;
}

Tensor encodeTime(const Tensor& series, const EncoderModel& model) {
    const auto& c = model.config;
    if (series.rank() != 2 || series.dim(0) != c.channels || series.dim(1) != c.steps) {
        throw ShapeError("series shape " + numerics::shapeString(series.shape()) + " does not match config [" +
                         std::to_string(c.channels) + "x" + std::to_string(c.steps) + "]");
    }
    Tensor z = numerics::conv1dForward(series, model.timeKernels, model.timeBias, Activation::relu);
    if (c.pointwise) z = numerics::conv1dForward(z, model.timePointKernels, model.timePointBias, Activation::relu);
    return z;
}

Tensor encodeText(const Tensor& embeddings, const EncoderModel& model) {
    const auto& c = model.config;
    if (embeddings.rank() != 2 || embeddings.dim(0) != c.embeddingDim) {
        throw ShapeError("text embeddings shape " + numerics::shapeString(embeddings.shape()) +
                         " does not match embedding dimension " + std::to_string(c.embeddingDim));
    }
    if (embeddings.dim(1) < c.textKernel) {
        throw ContractError("text has " + std::to_string(embeddings.dim(1)) + " segments, fewer than the text kernel width " +
                            std::to_string(c.textKernel));
    }
    Tensor z = numerics::conv1dForward(embeddings, model.textKernels, model.textBias, Activation::relu);
    if (c.pointwise) z = numerics::conv1dForward(z, model.textPointKernels, model.textPointBias, Activation::relu);
    return z;
}

Similarities prototypeSimilarities(const Tensor& reps, const Tensor& prototypes) {
    if (reps.rank() != 2 || prototypes.rank() != 2 || prototypes.dim(1) != reps.dim(0)) {
        throw ShapeError("prototype shape " + numerics::shapeString(prototypes.shape()) +
                         " incompatible with representations " + numerics::shapeString(reps.shape()));
    }
    const std::size_t m = prototypes.dim(0);
    const std::size_t segs = reps.dim(1);
    const std::size_t d = reps.dim(0);
    Similarities out;
    out.full = Tensor({m, segs});
    out.maxima.assign(m, 0.0);
    out.argmax.assign(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < segs; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < d; ++r) {
                const double diff = prototypes.at(i, r) - reps.at(r, j);
                acc += diff * diff;
            }
            const double sim = std::exp(-acc);
            out.full.at(i, j) = sim;
            if (j == 0 || sim > out.maxima[i]) {
                out.maxima[i] = sim;
                out.argmax[i] = j;
            }
        }
    }
    return out;
}

Classification classify(std::span<const double> simTime, std::span<const double> simText, const Tensor& fusion) {
    if (fusion.rank() != 2 || fusion.dim(1) != simTime.size() + simText.size()) {
        throw ShapeError("fusion matrix " + numerics::shapeString(fusion.shape()) + " incompatible with " +
                         std::to_string(simTime.size() + simText.size()) + " similarity scores");
    }
    Classification out;
    out.logits.assign(fusion.dim(0), 0.0);
    for (std::size_t c = 0; c < fusion.dim(0); ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < simTime.size(); ++i) acc += fusion.at(c, i) * simTime[i];
        for (std::size_t i = 0; i < simText.size(); ++i) acc += fusion.at(c, simTime.size() + i) * simText[i];
        out.logits[c] = acc;
    }
    const Tensor p = numerics::softmax(Tensor::vector(out.logits));
    out.probabilities.assign(p.data().begin(), p.data().end());
    return out;
}

ForwardTrace forward(const MultiModalSample& sample, const EncoderModel& model) {
    ForwardTrace f;
    f.zTime = encodeTime(sample.series, model);
    if (!sample.embedded()) throw ContractError("sample " + sample.id + " has no segment embeddings");
    f.zText = encodeText(sample.embeddings, model);
    f.time = prototypeSimilarities(f.zTime, model.timePrototypes);
    f.text = prototypeSimilarities(f.zText, model.textPrototypes);
    auto cls = classify(f.time.maxima, f.text.maxima, model.fusion);
    f.logits = std::move(cls.logits);
    f.probabilities = std::move(cls.probabilities);
    return f;
}

double regressionForward(const Tensor& zTime, const EncoderModel& model) {
    if (!model.config.regression) throw ContractError("regression head is disabled in the encoder config");
    const Tensor& P = model.timePrototypes;
    const auto sims = prototypeSimilarities(zTime, P);
    const std::size_t m = P.dim(0), h = P.dim(1), segs = zTime.dim(1);
    std::vector<double> pooled(h, 0.0);
    for (std::size_t j = 0; j < segs; ++j) {
        double peak = sims.full.at(0, j);
        for (std::size_t i = 1; i < m; ++i) peak = std::max(peak, sims.full.at(i, j));
        std::vector<double> a(m);
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) total += a[i] = std::exp(sims.full.at(i, j) - peak);
        for (std::size_t i = 0; i < m; ++i) {
            const double w = a[i] / total;
            for (std::size_t r = 0; r < h; ++r) pooled[r] += w * P.at(i, r);
        }
    }
    double out = model.headBias.item();
    for (std::size_t r = 0; r < h; ++r) out += model.headWeights[r] * (pooled[r] / static_cast<double>(segs));
    return out;
}

void projectPrototypes(EncoderModel& model, std::span<const MultiModalSample* const> train) {
    const auto& cfg = model.config;
    for (std::size_t c = 0; c < cfg.classes; ++c) {
        const auto members = ofClass(train, c);
        if (members.empty()) {
            throw ProjectionError("cannot project prototypes: class " + std::to_string(c) + " has no training samples");
        }
    }
    std::vector<Provenance> timeProv, textProv;
    for (Modality modality : {Modality::time, Modality::text}) {
        Tensor& protos = modality == Modality::time ? model.timePrototypes : model.textPrototypes;
        const std::size_t k = modality == Modality::time ? cfg.timePrototypes : cfg.textPrototypes;
        auto& prov = modality == Modality::time ? timeProv : textProv;
        Tensor projected = protos;
        for (std::size_t c = 0; c < cfg.classes; ++c) {
            const auto members = ofClass(train, c);
            std::vector<Tensor> reps;
            reps.reserve(members.size());
            for (const auto* s : members) reps.push_back(representations(*s, model, modality));

            for (std::size_t i = 0; i < k; ++i) {
                const std::size_t row = c * k + i;
                const auto p = protos.row(row);
                double best = 0.0;
                std::size_t bestSample = 0, bestSeg = 0;
                bool found = false;
                for (std::size_t s = 0; s < members.size(); ++s) {
                    const Tensor& z = reps[s];
                    for (std::size_t j = 0; j < z.dim(1); ++j) {
                        double acc = 0.0;
                        for (std::size_t r = 0; r < z.dim(0); ++r) {
                            const double diff = p[r] - z.at(r, j);
                            acc += diff * diff;
                        }
                        if (!found || acc < best) {
                            best = acc;
                            bestSample = s;
                            bestSeg = j;
                            found = true;
                        }
                    }
                }
                const Tensor& z = reps[bestSample];
                for (std::size_t r = 0; r < z.dim(0); ++r) projected.at(row, r) = z.at(r, bestSeg);
                prov.push_back(provenanceFor(*members[bestSample], bestSeg, modality, c, cfg));
            }
        }
        protos = std::move(projected);
    }
    model.timeProvenance = std::move(timeProv);
    model.textProvenance = std::move(textProv);
    model.projected = true;
}

Explanation explain(const MultiModalSample& sample, const EncoderModel& model, std::size_t omega,
                    Modality modality) {
    if (!model.projected) throw ContractError("explanations need a projected model");
    if (omega == 0) throw ContractError("omega must be >= 1");
    const Tensor reps = representations(sample, model, modality);
    const auto sims = prototypeSimilarities(reps, prototypesOf(model, modality));
    const std::size_t k = modality == Modality::time ? model.config.timePrototypes : model.config.textPrototypes;
    const auto& prov = modality == Modality::time ? model.timeProvenance : model.textProvenance;

    struct Pair {
        double score;
        std::size_t row, segment;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < sims.full.dim(0); ++i) {
        for (std::size_t j = 0; j < sims.full.dim(1); ++j) pairs.push_back({sims.full.at(i, j), i, j});
    }
    // Rows are ordered by (class, prototype), so row order is the class-then-prototype tie-break.
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.row != b.row) return a.row < b.row;
        return a.segment < b.segment;
    });
    if (pairs.size() > omega) pairs.resize(omega);

    Explanation out;
    out.modality = modality;
    for (const auto& p : pairs) {
        ExplanationItem item;
        item.classIndex = p.row / k;
        item.prototype = p.row % k;
        item.segment = p.segment;
        item.score = p.score;
        if (modality == Modality::time) {
            item.segmentWindow = seriesWindow(sample.series, p.segment, model.config.timeKernel);
        } else {
            item.segmentText = data::joinSegments(sample.segments, p.segment, model.config.textKernel);
        }
        item.provenance = prov.at(p.row);
        out.items.push_back(std::move(item));
    }
    return out;
}

std::string describe(const ExplanationItem& item, const std::vector<std::string>& labelNames) {
    const std::string label = item.classIndex < labelNames.size() ? labelNames[item.classIndex]
                                                                  : std::to_string(item.classIndex);
    char score[32];
    std::snprintf(score, sizeof score, "%.3f", item.score);
    if (item.provenance.modality == Modality::text) {
        return "[" + label + "] similarity " + score + ": \"" + item.segmentText + "\" matches prototype \"" +
               item.provenance.text + "\"";
    }
    return "[" + label + "] similarity " + score + ": window at step " + std::to_string(item.segment) +
           " matches prototype from sample " + item.provenance.sampleId + " step " +
           std::to_string(item.provenance.segment);
}

json toJson(const EncoderModel& model) {
    json params = json::object();
    for (const auto& [name, t] : model.parameters()) params[name] = tensorJson(*t);
    json doc{{"config", toJson(model.config)}, {"parameters", params}, {"projected", model.projected}};
    json prov = json::object();
    prov["time"] = json::array();
    prov["text"] = json::array();
    for (const auto& p : model.timeProvenance) prov["time"].push_back(provenanceJson(p));
    for (const auto& p : model.textProvenance) prov["text"].push_back(provenanceJson(p));
    doc["provenance"] = prov;
    return doc;
}

EncoderModel modelFromJson(const json& doc) {
    try {
        EncoderModel m;
        m.config = encoderConfigFromJson(doc.at("config"));
        const auto& params = doc.at("parameters");
        for (auto& [name, t] : m.parameters()) {
            if (!params.contains(name)) throw SchemaError("model document lacks parameter '" + name + "'");
            *t = tensorFromJson(params.at(name));
        }
        m.projected = doc.at("projected").get<bool>();
        for (const auto& p : doc.at("provenance").at("time")) m.timeProvenance.push_back(provenanceFromJson(p));
        for (const auto& p : doc.at("provenance").at("text")) m.textProvenance.push_back(provenanceFromJson(p));

        Rng probe(0);
        const EncoderModel shapes = initializeModel(m.config, probe);
        const auto expected = shapes.parameters();
        const auto actual = m.parameters();
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (expected[i].second->shape() != actual[i].second->shape()) {
                throw SchemaError("parameter '" + actual[i].first + "' has shape " +
                                  numerics::shapeString(actual[i].second->shape()) + ", config implies " +
                                  numerics::shapeString(expected[i].second->shape()));
            }
        }
        if (m.projected && (m.timeProvenance.size() != m.timePrototypes.dim(0) ||
                            m.textProvenance.size() != m.textPrototypes.dim(0))) {
            throw SchemaError("provenance records do not cover every prototype");
        }
        return m;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model document: ") + e.what());
    }
}

}  // namespace timexl::encoder
