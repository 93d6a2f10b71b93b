#include "ddcnn/ensemble.hpp"

#include "ddcnn/errors.hpp"

namespace ddcnn {

TensorF ensemble_predict(const std::vector<const ModelGraph*>& models,
                         const std::vector<double>& weights, const TensorF& input) {
    if (models.empty()) {
        throw ConfigError("ensemble needs at least one member model");
    }
    if (!weights.empty() && weights.size() != models.size()) {
        throw ConfigError("ensemble has " + std::to_string(models.size()) +
                          " members but " + std::to_string(weights.size()) +
                          " weights");
    }
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        if (w < 0.0) throw ConfigError("ensemble weights must be non-negative");
        weight_sum += w;
    }
    if (weight_sum <= 0.0) {
        throw ConfigError("ensemble weights must not all be zero");
    }

    for (const ModelGraph* model : models) {
        if (model->input_dims != models.front()->input_dims) {
            throw ShapeError("ensemble members disagree on input dimensions");
        }
    }

    TensorD sum({10});
    for (std::size_t i = 0; i < models.size(); ++i) {
        const double w = (weights.empty() ? 1.0 : weights[i]) / weight_sum;
        if (w == 0.0) continue;
        const TensorF probs = models[i]->forward(input);
        if (probs.size() != sum.size()) {
            throw ShapeError("ensemble member produced " + std::to_string(probs.size()) +
                             " outputs, expected 10");
        }
        for (std::size_t k = 0; k < sum.size(); ++k) {
            sum[k] += w * static_cast<double>(probs[k]);
        }
    }
    return sum.cast<float>();
}

} // namespace ddcnn
