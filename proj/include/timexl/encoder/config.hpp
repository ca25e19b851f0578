#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "json.hpp"

namespace timexl::encoder {

enum class RegressionLoss { mse, mae };

struct EncoderConfig {
    std::size_t classes = 2;         // C
    std::size_t channels = 2;        // N
    std::size_t steps = 32;          // T
    std::size_t embeddingDim = 64;   // d_s, fixed by the embedding provider

    std::size_t timeKernel = 8;      // w
    std::size_t timeFeatures = 16;   // h
    std::size_t textKernel = 1;      // w'
    std::size_t textFeatures = 16;   // h'
    bool pointwise = false;          // extra relu 1x1 conv on each modality

    std::size_t timePrototypes = 5;  // k per class
    std::size_t textPrototypes = 5;  // k' per class

    double lambdaClustering = 0.1;
    double lambdaEvidencing = 0.1;
    double lambdaDiversity = 0.1;
    double dMinTime = 1.0;
    double dMinText = 3.0;

    double learningRate = 1e-3;
    std::size_t epochs = 200;
    std::size_t batchSize = 32;
    std::size_t projectEvery = 0;    // 0: project once after the last epoch
    std::uint64_t seed = 7;

    bool regression = false;
    RegressionLoss regressionLoss = RegressionLoss::mse;

    std::size_t timeSegments() const noexcept { return steps - timeKernel + 1; }
    std::size_t totalTimePrototypes() const noexcept { return classes * timePrototypes; }
    std::size_t totalTextPrototypes() const noexcept { return classes * textPrototypes; }

    // Throws InvalidConfigError naming the first violated constraint.
    void validate() const;
};

nlohmann::json toJson(const EncoderConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
EncoderConfig encoderConfigFromJson(const nlohmann::json& doc);

}  // namespace timexl::encoder
