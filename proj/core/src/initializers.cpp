#include "ddcnn/initializers.hpp"

#include <cmath>

#include "ddcnn/errors.hpp"

namespace ddcnn {

namespace {

TensorF& param(ModelGraph& graph, const std::string& key) {
    auto it = graph.parameters.find(key);
    if (it == graph.parameters.end()) {
        throw ShapeError("initialize: parameter '" + key + "' is not bound");
    }
    return it->second;
}

double init_std(InitKind kind, double fan_in, double fan_out) {
    switch (kind) {
    case InitKind::glorot_normal:
        return std::sqrt(2.0 / (fan_in + fan_out));
    case InitKind::he_normal:
        return std::sqrt(2.0 / fan_in);
    }
    throw ConfigError("unknown initializer kind");
}

void fill_normal(TensorF& t, double stddev, Rng& rng) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<float>(rng.normal() * stddev);
    }
}

void fill_constant(TensorF& t, float value) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = value;
}

void init_walk(ModelGraph& graph, std::vector<LayerSpec>& layers, InitKind kind,
               Rng& rng) {
    for (auto& layer : layers) {
        switch (layer.kind) {
        case LayerKind::conv2d: {
            const auto& p = layer.conv;
            const double fan_in = static_cast<double>(p.in_channels) * p.kernel_h * p.kernel_w;
            const double fan_out = static_cast<double>(p.out_channels) * p.kernel_h * p.kernel_w;
            fill_normal(param(graph, layer.name + ".weight"),
                        init_std(kind, fan_in, fan_out), rng);
            fill_constant(param(graph, layer.name + ".bias"), 0.0f);
            break;
        }
        case LayerKind::dense: {
            TensorF& w = param(graph, layer.name + ".weight");
            const double fan_out = static_cast<double>(w.dim(0));
            const double fan_in = static_cast<double>(w.dim(1));
            fill_normal(w, init_std(kind, fan_in, fan_out), rng);
            fill_constant(param(graph, layer.name + ".bias"), 0.0f);
            break;
        }
        case LayerKind::batchnorm:
            fill_constant(param(graph, layer.name + ".gamma"), 1.0f);
            fill_constant(param(graph, layer.name + ".beta"), 0.0f);
            fill_constant(param(graph, layer.name + ".running_mean"), 0.0f);
            fill_constant(param(graph, layer.name + ".running_var"), 1.0f);
            break;
        case LayerKind::residual:
            init_walk(graph, layer.body, kind, rng);
            init_walk(graph, layer.shortcut, kind, rng);
            break;
        default:
            break;
        }
    }
}

} // namespace

void initialize(ModelGraph& graph, const InitializerSpec& spec) {
    Rng rng(spec.seed);
    init_walk(graph, graph.layers, spec.kind, rng);
}

void initialize(ModelGraph& graph, std::uint64_t seed) {
    initialize(graph, InitializerSpec{graph.default_init, seed});
}

} // namespace ddcnn
