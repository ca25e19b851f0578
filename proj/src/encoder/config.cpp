#include "timexl/encoder/config.hpp"

#include <cmath>
#include <set>

#include "timexl/error.hpp"

namespace timexl::encoder {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw InvalidConfigError("encoder config: " + message);
}

}  // namespace

void EncoderConfig::validate() const {
    require(classes >= 2, "classes must be >= 2");
    require(channels >= 1 && steps >= 1 && embeddingDim >= 1, "channels, steps and embedding_dim must be >= 1");
    require(timeKernel >= 1 && textKernel >= 1, "kernel widths must be >= 1");
    require(timeKernel <= steps, "time kernel width " + std::to_string(timeKernel) + " exceeds series length " +
                                     std::to_string(steps));
    require(timeFeatures >= 1 && textFeatures >= 1, "feature dimensions must be >= 1");
    require(timePrototypes >= 1 && textPrototypes >= 1, "prototype counts must be >= 1");
    require(lambdaClustering >= 0 && lambdaEvidencing >= 0 && lambdaDiversity >= 0, "lambdas must be >= 0");
    require(dMinTime > 0 && dMinText > 0, "diversity thresholds must be > 0");
    require(learningRate > 0 && std::isfinite(learningRate), "learning_rate must be positive");
    require(batchSize >= 1, "batch_size must be >= 1");
}

json toJson(const EncoderConfig& c) {
    return json{{"classes", c.classes},
                {"channels", c.channels},
                {"steps", c.steps},
                {"embedding_dim", c.embeddingDim},
                {"time_kernel", c.timeKernel},
                {"time_features", c.timeFeatures},
                {"text_kernel", c.textKernel},
                {"text_features", c.textFeatures},
                {"pointwise", c.pointwise},
                {"time_prototypes", c.timePrototypes},
                {"text_prototypes", c.textPrototypes},
                {"lambda_clustering", c.lambdaClustering},
                {"lambda_evidencing", c.lambdaEvidencing},
                {"lambda_diversity", c.lambdaDiversity},
                {"d_min_time", c.dMinTime},
                {"d_min_text", c.dMinText},
                {"learning_rate", c.learningRate},
                {"epochs", c.epochs},
                {"batch_size", c.batchSize},
                {"project_every", c.projectEvery},
                {"seed", c.seed},
                {"regression", c.regression},
                {"regression_loss", c.regressionLoss == RegressionLoss::mae ? "mae" : "mse"}};
}

EncoderConfig encoderConfigFromJson(const json& doc) {
    if (!doc.is_object()) throw InvalidConfigError("encoder config must be an object");
    const EncoderConfig defaults;
    const json known = toJson(defaults);
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) throw InvalidConfigError("encoder config: unknown key '" + key + "'");
    }
    EncoderConfig c;
    try {
        c.classes = doc.value("classes", c.classes);
        c.channels = doc.value("channels", c.channels);
        c.steps = doc.value("steps", c.steps);
        c.embeddingDim = doc.value("embedding_dim", c.embeddingDim);
        c.timeKernel = doc.value("time_kernel", c.timeKernel);
        c.timeFeatures = doc.value("time_features", c.timeFeatures);
        c.textKernel = doc.value("text_kernel", c.textKernel);
        c.textFeatures = doc.value("text_features", c.textFeatures);
        c.pointwise = doc.value("pointwise", c.pointwise);
        c.timePrototypes = doc.value("time_prototypes", c.timePrototypes);
        c.textPrototypes = doc.value("text_prototypes", c.textPrototypes);
        c.lambdaClustering = doc.value("lambda_clustering", c.lambdaClustering);
        c.lambdaEvidencing = doc.value("lambda_evidencing", c.lambdaEvidencing);
        c.lambdaDiversity = doc.value("lambda_diversity", c.lambdaDiversity);
        c.dMinTime = doc.value("d_min_time", c.dMinTime);
        c.dMinText = doc.value("d_min_text", c.dMinText);
        c.learningRate = doc.value("learning_rate", c.learningRate);
        c.epochs = doc.value("epochs", c.epochs);
        c.batchSize = doc.value("batch_size", c.batchSize);
        c.projectEvery = doc.value("project_every", c.projectEvery);
        c.seed = doc.value("seed", c.seed);
        c.regression = doc.value("regression", c.regression);
        const auto loss = doc.value("regression_loss", std::string("mse"));
        if (loss == "mse") {
            c.regressionLoss = RegressionLoss::mse;
        } else if (loss == "mae") {
            c.regressionLoss = RegressionLoss::mae;
        } else {
            throw InvalidConfigError("encoder config: regression_loss must be 'mse' or 'mae'");
        }
    } catch (const json::exception& e) {
        throw InvalidConfigError(std::string("encoder config: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace timexl::encoder
