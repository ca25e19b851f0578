#include "timexl/data/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <regex>

#include "timexl/data/embedding.hpp"
#include "timexl/error.hpp"
#include "timexl/numerics/rng.hpp"

namespace timexl::data {

using nlohmann::json;
using numerics::Rng;
using numerics::Tensor;

namespace {

const std::vector<std::string> kFiller = {
    "the",      "report",   "notes",    "morning",  "values",   "across",  "region",
    "observed", "levels",   "recent",   "period",   "station",  "data",    "shows",
    "overall",  "pattern",  "during",   "update",   "series",   "measured", "remains",
    "within",   "typical",  "range",    "analysts", "review",   "summary", "daily",
    "figures",  "compared", "previous", "week",     "local",    "readings", "general",
    "trend",    "conditions", "recorded", "sources", "indicate"};

const std::vector<std::string> kNoise = {"lorem", "ipsum", "zzz", "glitch",
                                         "static", "qwerty", "blah", "xyzzy"};

const std::regex kLabelPattern("[A-Za-z0-9_]+(-[A-Za-z0-9_]+)*");

std::vector<std::string> labelNamesFor(const SyntheticSpec& spec) {
    if (!spec.labelNames.empty()) return spec.labelNames;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < spec.classes; ++c) names.push_back("class" + std::to_string(c));
    return names;
}

void validate(const SyntheticSpec& spec) {
    if (spec.classes < 2) throw InvalidConfigError("synthetic spec: classes must be >= 2");
    if (!spec.labelNames.empty() && spec.labelNames.size() != spec.classes) {
        throw InvalidConfigError("synthetic spec: label_names must have one entry per class");
    }
    for (const auto& name : spec.labelNames) {
        if (!std::regex_match(name, kLabelPattern)) {
            throw InvalidConfigError("synthetic spec: label '" + name + "' must be a single token");
        }
    }
    if (spec.channels == 0 || spec.steps == 0 || spec.samples == 0) {
        throw InvalidConfigError("synthetic spec: channels, steps and samples must be >= 1");
    }
    if (spec.motifLength == 0 || spec.motifLength > spec.steps) {
        throw InvalidConfigError("synthetic spec: motif length " + std::to_string(spec.motifLength) +
                                 " exceeds series length " + std::to_string(spec.steps));
    }
    if (spec.motifsPerClass == 0 || spec.sentences == 0 || spec.wordsPerSentence == 0) {
        throw InvalidConfigError("synthetic spec: motifs, sentences and words per sentence must be >= 1");
    }
    for (double r : {spec.noiseTokenRate, spec.hintCorruptionRate}) {
        if (!(r >= 0.0 && r <= 1.0)) throw InvalidConfigError("synthetic spec: rates must lie in [0, 1]");
    }
    if (spec.regression.enabled && spec.regression.amplitudeMax < spec.regression.amplitudeMin) {
        throw InvalidConfigError("synthetic spec: amplitude range is empty");
    }
}

// motifs[c][m] is a channels x length template.
std::vector<std::vector<Tensor>> motifBanks(const SyntheticSpec& spec, Rng& rng) {
    std::vector<std::vector<Tensor>> banks(spec.classes);
    const double len = static_cast<double>(spec.motifLength);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        for (std::size_t m = 0; m < spec.motifsPerClass; ++m) {
            Tensor motif({spec.channels, spec.motifLength});
            for (std::size_t ch = 0; ch < spec.channels; ++ch) {
                const double phase = 2.0 * std::numbers::pi * rng.uniform();
                for (std::size_t u = 0; u < spec.motifLength; ++u) {
                    const double x = (static_cast<double>(u) + 0.5) / len;
                    const double window = spec.repeatMotif ? 1.0 : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * x);
                    motif.at(ch, u) = window * std::sin(2.0 * std::numbers::pi * static_cast<double>(c + 1) * x + phase);
                }
            }
            banks[c].push_back(std::move(motif));
        }
    }
    return banks;
}

}  // namespace

SyntheticSpec syntheticSpecFromJson(const json& doc) {
    SyntheticSpec s;
    try {
        s.seed = doc.value("seed", s.seed);
        s.classes = doc.value("classes", s.classes);
        s.labelNames = doc.value("label_names", s.labelNames);
        if (!s.labelNames.empty() && !doc.contains("classes")) s.classes = s.labelNames.size();
        s.channels = doc.value("channels", s.channels);
        s.steps = doc.value("steps", s.steps);
        s.samples = doc.value("samples", s.samples);
        s.motifLength = doc.value("motif_length", s.motifLength);
        s.motifsPerClass = doc.value("motifs_per_class", s.motifsPerClass);
        s.motifAmplitude = doc.value("motif_amplitude", s.motifAmplitude);
        s.repeatMotif = doc.value("repeat_motif", s.repeatMotif);
        s.seriesNoise = doc.value("series_noise", s.seriesNoise);
        s.sentences = doc.value("sentences", s.sentences);
        s.wordsPerSentence = doc.value("words_per_sentence", s.wordsPerSentence);
        s.noiseTokenRate = doc.value("noise_token_rate", s.noiseTokenRate);
        s.hintCorruptionRate = doc.value("hint_corruption_rate", s.hintCorruptionRate);
        s.latentCue = doc.value("latent_cue", s.latentCue);
        s.timestamps = doc.value("timestamps", s.timestamps);
        if (doc.contains("regression")) {
            const auto& r = doc.at("regression");
            s.regression.enabled = r.value("enabled", true);
            s.regression.slope = r.value("slope", s.regression.slope);
            s.regression.intercept = r.value("intercept", s.regression.intercept);
            s.regression.targetNoise = r.value("target_noise", s.regression.targetNoise);
            s.regression.amplitudeMin = r.value("amplitude_min", s.regression.amplitudeMin);
            s.regression.amplitudeMax = r.value("amplitude_max", s.regression.amplitudeMax);
        }
    } catch (const json::exception& e) {
        throw InvalidConfigError(std::string("synthetic spec: ") + e.what());
    }
    return s;
}

json toJson(const SyntheticSpec& s) {
    json doc = {{"seed", s.seed},
                {"classes", s.classes},
                {"label_names", labelNamesFor(s)},
                {"channels", s.channels},
                {"steps", s.steps},
                {"samples", s.samples},
                {"motif_length", s.motifLength},
                {"motifs_per_class", s.motifsPerClass},
                {"motif_amplitude", s.motifAmplitude},
                {"repeat_motif", s.repeatMotif},
                {"series_noise", s.seriesNoise},
                {"sentences", s.sentences},
                {"words_per_sentence", s.wordsPerSentence},
                {"noise_token_rate", s.noiseTokenRate},
                {"hint_corruption_rate", s.hintCorruptionRate},
                {"latent_cue", s.latentCue},
                {"timestamps", s.timestamps}};
    if (s.regression.enabled) {
        doc["regression"] = {{"enabled", true},
                             {"slope", s.regression.slope},
                             {"intercept", s.regression.intercept},
                             {"target_noise", s.regression.targetNoise},
                             {"amplitude_min", s.regression.amplitudeMin},
                             {"amplitude_max", s.regression.amplitudeMax}};
    }
    return doc;
}

Dataset synthesizeDataset(const SyntheticSpec& spec) {
    validate(spec);
    const auto labels = labelNamesFor(spec);

    Dataset ds;
    auto& m = ds.manifest;
    m.labelNames = labels;
    m.channels = spec.channels;
    m.steps = spec.steps;
    m.task = spec.regression.enabled ? TaskKind::regression : TaskKind::classification;
    m.segmentation = SegmentationPolicy{SegmentationKind::sentence, 16};
    SyntheticVocabulary vocab;
    for (const auto& l : labels) vocab.indicatorTokens.push_back("hint-" + l);
    vocab.noiseTokens = kNoise;
    vocab.cuePrefix = "cue-";
    m.vocabulary = vocab;

    Rng root(spec.seed);
    Rng motifRng = root.fork(1);
    Rng labelRng = root.fork(2);
    Rng sampleRng = root.fork(3);
    const auto banks = motifBanks(spec, motifRng);

    // Balanced labels: round-robin then shuffle, so class counts differ by <= 1.
    std::vector<std::size_t> assigned(spec.samples);
    for (std::size_t i = 0; i < spec.samples; ++i) assigned[i] = i % spec.classes;
    labelRng.shuffle(std::span<std::size_t>(assigned));

    const std::size_t idWidth = std::max<std::size_t>(5, std::to_string(spec.samples).size());
    for (std::size_t i = 0; i < spec.samples; ++i) {
        MultiModalSample s;
        const std::string digits = std::to_string(i);
        s.id = "s" + std::string(idWidth - digits.size(), '0') + digits;
        if (spec.timestamps) s.timestamp = static_cast<std::int64_t>(i);
        s.label = assigned[i];

        // Series.
        double amplitude = spec.motifAmplitude;
        if (spec.regression.enabled) {
            amplitude = spec.regression.amplitudeMin +
                        (spec.regression.amplitudeMax - spec.regression.amplitudeMin) * sampleRng.uniform();
        }
        s.series = Tensor({spec.channels, spec.steps});
        for (double& v : s.series.values()) v = spec.seriesNoise * sampleRng.gaussian();
        const Tensor& motif = banks[s.label][sampleRng.below(spec.motifsPerClass)];
        if (spec.repeatMotif) {
            const std::size_t shift = sampleRng.below(spec.motifLength);
            for (std::size_t ch = 0; ch < spec.channels; ++ch) {
                for (std::size_t t = 0; t < spec.steps; ++t) {
                    s.series.at(ch, t) += amplitude * motif.at(ch, (t + shift) % spec.motifLength);
                }
            }
        } else {
            const std::size_t offset = sampleRng.below(spec.steps - spec.motifLength + 1);
            for (std::size_t ch = 0; ch < spec.channels; ++ch) {
                for (std::size_t u = 0; u < spec.motifLength; ++u) {
                    s.series.at(ch, offset + u) += amplitude * motif.at(ch, u);
                }
            }
        }
        if (spec.regression.enabled) {
            s.target = spec.regression.slope * amplitude + spec.regression.intercept +
                       spec.regression.targetNoise * sampleRng.gaussian();
        }

        // Text.
        std::vector<std::vector<std::string>> sentences(spec.sentences);
        for (auto& words : sentences) {
            for (std::size_t w = 0; w < spec.wordsPerSentence; ++w) {
                words.push_back(kFiller[sampleRng.below(kFiller.size())]);
            }
        }
        std::size_t hinted = s.label;
        if (sampleRng.bernoulli(spec.hintCorruptionRate)) hinted = sampleRng.below(spec.classes);
        auto& hintSentence = sentences[sampleRng.below(sentences.size())];
        hintSentence.insert(hintSentence.begin() + static_cast<std::ptrdiff_t>(sampleRng.below(hintSentence.size() + 1)),
                            vocab.indicatorTokens[hinted]);
        for (auto& words : sentences) {
            if (sampleRng.bernoulli(spec.noiseTokenRate)) {
                words.insert(words.begin() + static_cast<std::ptrdiff_t>(sampleRng.below(words.size() + 1)),
                             kNoise[sampleRng.below(kNoise.size())]);
            }
        }
        if (spec.latentCue) {
            char cue[64];
            std::snprintf(cue, sizeof cue, "%s%s-%06llu", vocab.cuePrefix.c_str(), labels[s.label].c_str(),
                          static_cast<unsigned long long>(sampleRng.below(1000000)));
            std::vector<std::string> cueSentence = {"archive", "reference", cue};
            sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(sampleRng.below(sentences.size() + 1)),
                             std::move(cueSentence));
        }
        for (const auto& words : sentences) {
            std::string sentence;
            for (const auto& w : words) {
                if (!sentence.empty()) sentence += ' ';
                sentence += w;
            }
            sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
            s.segments.push_back(sentence + ".");
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::optional<std::size_t> indicatorVote(const std::vector<std::string>& segments,
                                         const SyntheticVocabulary& vocabulary) {
    std::vector<std::size_t> counts(vocabulary.indicatorTokens.size(), 0);
    for (const auto& seg : segments) {
        for (const auto& token : tokenize(seg)) {
            for (std::size_t c = 0; c < counts.size(); ++c) {
                if (token == vocabulary.indicatorTokens[c]) ++counts[c];
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > counts[best]) best = c;
    }
    if (counts.empty() || counts[best] == 0) return std::nullopt;
    return best;
}

}  // namespace timexl::data
