#include "ddcnn/graph.hpp"

#include <algorithm>

#include "ddcnn/errors.hpp"

namespace ddcnn {

namespace {

using Shape = std::vector<std::size_t>;

const TensorF& param(const ModelGraph& graph, const std::string& key) {
    auto it = graph.parameters.find(key);
    if (it == graph.parameters.end()) {
        throw ShapeError("model parameter '" + key + "' is not bound");
    }
    return it->second;
}

void allocate(ModelGraph& graph, const std::string& key, Shape dims) {
    auto [it, inserted] = graph.parameters.emplace(key, TensorF(std::move(dims)));
    (void)it;
    if (!inserted) {
        throw ConfigError("duplicate parameter name '" + key + "'");
    }
}

Shape bind_walk(ModelGraph& graph, std::vector<LayerSpec>& layers, Shape shape);

Shape bind_layer(ModelGraph& graph, LayerSpec& layer, Shape shape) {
    switch (layer.kind) {
    case LayerKind::conv2d: {
        if (shape.size() != 3) {
            throw ShapeError("layer '" + layer.name + "': conv2d needs a [C,H,W] input");
        }
        if (shape[0] != static_cast<std::size_t>(layer.conv.in_channels)) {
            throw ShapeError("layer '" + layer.name + "': expects " +
                             std::to_string(layer.conv.in_channels) +
                             " input channels, got " + std::to_string(shape[0]));
        }
        const auto& p = layer.conv;
        std::size_t out_h, out_w;
        try {
            out_h = static_cast<std::size_t>(p.output_h(static_cast<int>(shape[1])));
            out_w = static_cast<std::size_t>(p.output_w(static_cast<int>(shape[2])));
        } catch (const ConfigError& e) {
            throw ConfigError("layer '" + layer.name + "': " + e.what());
        }
        allocate(graph, layer.name + ".weight",
                 {static_cast<std::size_t>(p.out_channels),
                  static_cast<std::size_t>(p.in_channels),
                  static_cast<std::size_t>(p.kernel_h),
                  static_cast<std::size_t>(p.kernel_w)});
        allocate(graph, layer.name + ".bias",
                 {static_cast<std::size_t>(p.out_channels)});
        return {static_cast<std::size_t>(p.out_channels), out_h, out_w};
    }
    case LayerKind::maxpool:
        if (shape.size() != 3) {
            throw ShapeError("layer '" + layer.name + "': maxpool needs a [C,H,W] input");
        }
        return {shape[0], (shape[1] + 1) / 2, (shape[2] + 1) / 2};
    case LayerKind::dense: {
        if (shape.size() != 1) {
            throw ShapeError("layer '" + layer.name +
                             "': dense needs a rank-1 input; insert flatten or gap first");
        }
        if (layer.units == 0) {
            throw ConfigError("layer '" + layer.name + "': dense needs units > 0");
        }
        allocate(graph, layer.name + ".weight", {layer.units, shape[0]});
        allocate(graph, layer.name + ".bias", {layer.units});
        return {layer.units};
    }
    case LayerKind::relu:
        return shape;
    case LayerKind::softmax:
        if (shape.size() != 1) {
            throw ShapeError("layer '" + layer.name + "': softmax needs a rank-1 input");
        }
        return shape;
    case LayerKind::dropout:
        if (layer.rate < 0.0 || layer.rate >= 1.0) {
            throw ConfigError("layer '" + layer.name + "': dropout rate must lie in [0,1)");
        }
        return shape;
    case LayerKind::batchnorm: {
        if (shape.size() != 3) {
            throw ShapeError("layer '" + layer.name + "': batchnorm needs a [C,H,W] input");
        }
        for (const char* suffix : {".gamma", ".beta", ".running_mean", ".running_var"}) {
            allocate(graph, layer.name + suffix, {shape[0]});
        }
        return shape;
    }
    case LayerKind::flatten: {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return {n};
    }
    case LayerKind::gap:
        if (shape.size() != 3) {
            throw ShapeError("layer '" + layer.name + "': gap needs a [C,H,W] input");
        }
        return {shape[0]};
    case LayerKind::residual: {
        if (shape.size() != 3) {
            throw ShapeError("layer '" + layer.name + "': residual needs a [C,H,W] input");
        }
        Shape body_out = bind_walk(graph, layer.body, shape);
        Shape shortcut_out =
            layer.shortcut.empty() ? shape : bind_walk(graph, layer.shortcut, shape);
        if (body_out != shortcut_out) {
            throw ShapeError("layer '" + layer.name + "': body output " +
                             TensorF::shape_string(body_out) +
                             " does not match shortcut output " +
                             TensorF::shape_string(shortcut_out));
        }
        return body_out;
    }
    }
    throw ConfigError("layer '" + layer.name + "': unknown layer kind");
}

Shape bind_walk(ModelGraph& graph, std::vector<LayerSpec>& layers, Shape shape) {
    for (auto& layer : layers) {
        if (layer.has_parameters() && layer.name.empty()) {
            throw ConfigError("parameterized layers need a name");
        }
        shape = bind_layer(graph, layer, shape);
    }
    return shape;
}

TensorF run_layers(const ModelGraph& graph, const std::vector<LayerSpec>& layers,
                   TensorF x, RunMode mode, Rng* rng,
                   std::vector<LayerActivation>* trace) {
    for (const auto& layer : layers) {
        LayerActivation act;
        if (trace) act.input = x;
        switch (layer.kind) {
        case LayerKind::conv2d:
            x = conv2d_forward(x, param(graph, layer.name + ".weight"),
                               param(graph, layer.name + ".bias"), layer.conv);
            break;
        case LayerKind::maxpool: {
            auto pooled = maxpool2d(x);
            if (trace) act.pool_argmax = std::move(pooled.argmax);
            x = std::move(pooled.output);
            break;
        }
        case LayerKind::dense:
            x = dense_forward(x, param(graph, layer.name + ".weight"),
                              param(graph, layer.name + ".bias"));
            break;
        case LayerKind::relu:
            x = relu(x);
            break;
        case LayerKind::softmax:
            x = softmax(x);
            break;
        case LayerKind::dropout: {
            if (mode == RunMode::train) {
                if (!rng) {
                    throw ConfigError("training-mode forward through dropout needs an rng");
                }
                auto dropped = dropout_with_mask(x, layer.rate, mode, *rng);
                if (trace) act.dropout_mask = std::move(dropped.keep_mask);
                x = std::move(dropped.output);
            }
            break;
        }
        case LayerKind::batchnorm:
            x = batchnorm_inference(x, param(graph, layer.name + ".gamma"),
                                    param(graph, layer.name + ".beta"),
                                    param(graph, layer.name + ".running_mean"),
                                    param(graph, layer.name + ".running_var"));
            break;
        case LayerKind::flatten:
            x = flatten(x);
            break;
        case LayerKind::gap:
            x = global_average_pool(x);
            break;
        case LayerKind::residual: {
            TensorF body_out = run_layers(graph, layer.body, x, mode, rng, nullptr);
            TensorF shortcut_out =
                layer.shortcut.empty()
                    ? x
                    : run_layers(graph, layer.shortcut, x, mode, rng, nullptr);
            if (!body_out.same_shape(shortcut_out)) {
                throw ShapeError("layer '" + layer.name +
                                 "': residual branch shapes differ");
            }
            for (std::size_t i = 0; i < body_out.size(); ++i) {
                body_out[i] += shortcut_out[i];
            }
            x = relu(body_out);
            break;
        }
        }
        if (trace) trace->push_back(std::move(act));
    }
    return x;
}

bool subtree_trainable(const LayerSpec& layer) {
    if (layer.has_parameters() && layer.trainable) return true;
    for (const auto& sub : layer.body) {
        if (subtree_trainable(sub)) return true;
    }
    for (const auto& sub : layer.shortcut) {
        if (subtree_trainable(sub)) return true;
    }
    return false;
}

void accumulate(GradMap& grads, const std::string& key, Tensor<float>&& g) {
    auto it = grads.find(key);
    if (it == grads.end()) {
        grads.emplace(key, std::move(g));
        return;
    }
    if (!it->second.same_shape(g)) {
        throw ShapeError("gradient shape mismatch for '" + key + "'");
    }
    for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
}

std::size_t count_walk(const ModelGraph& graph, const std::vector<LayerSpec>& layers,
                       bool trainable_only) {
    std::size_t total = 0;
    for (const auto& layer : layers) {
        switch (layer.kind) {
        case LayerKind::conv2d:
        case LayerKind::dense:
            if (!trainable_only || layer.trainable) {
                total += param(graph, layer.name + ".weight").size();
                total += param(graph, layer.name + ".bias").size();
            }
            break;
        case LayerKind::batchnorm:
            if (!trainable_only || layer.trainable) {
                total += param(graph, layer.name + ".gamma").size();
                total += param(graph, layer.name + ".beta").size();
            }
            if (!trainable_only) {
                // running statistics are never trainable
                total += param(graph, layer.name + ".running_mean").size();
                total += param(graph, layer.name + ".running_var").size();
            }
            break;
        case LayerKind::residual:
            total += count_walk(graph, layer.body, trainable_only);
            total += count_walk(graph, layer.shortcut, trainable_only);
            break;
        default:
            break;
        }
    }
    return total;
}

void freeze_walk(std::vector<LayerSpec>& layers,
                 const std::function<bool(const LayerSpec&)>& predicate) {
    for (auto& layer : layers) {
        if (predicate(layer)) layer.trainable = false;
        freeze_walk(layer.body, predicate);
        freeze_walk(layer.shortcut, predicate);
    }
}

} // namespace

void bind_parameters(ModelGraph& graph) {
    graph.parameters.clear();
    Shape shape(graph.input_dims.begin(), graph.input_dims.end());
    for (std::size_t d : shape) {
        if (d == 0) throw ConfigError("model input dims must be positive");
    }
    bind_walk(graph, graph.layers, shape);
}

TensorF ModelGraph::forward(const TensorF& input, RunMode mode,
                            Rng* dropout_rng) const {
    if (input.rank() != 3 || input.dim(0) != input_dims[0] ||
        input.dim(1) != input_dims[1] || input.dim(2) != input_dims[2]) {
        throw ShapeError("model '" + name + "' expects input [" +
                         std::to_string(input_dims[0]) + "," +
                         std::to_string(input_dims[1]) + "," +
                         std::to_string(input_dims[2]) + "], got " +
                         input.shape_string());
    }
    return run_layers(*this, layers, input, mode, dropout_rng, nullptr);
}

ForwardTrace forward_trace(const ModelGraph& graph, const TensorF& input,
                           RunMode mode, Rng* dropout_rng) {
    ForwardTrace trace;
    trace.activations.reserve(graph.layers.size());
    trace.output =
        run_layers(graph, graph.layers, input, mode, dropout_rng, &trace.activations);
    return trace;
}

void backward_into(const ModelGraph& graph, const ForwardTrace& trace,
                   const TensorF& grad_logits, GradMap& grads) {
    if (graph.layers.empty() || graph.layers.back().kind != LayerKind::softmax) {
        throw ConfigError("backward pass expects a terminal softmax layer");
    }
    if (trace.activations.size() != graph.layers.size()) {
        throw ShapeError("forward trace does not match the graph");
    }

    std::size_t earliest = graph.layers.size();
    for (std::size_t i = 0; i < graph.layers.size(); ++i) {
        if (subtree_trainable(graph.layers[i])) {
            earliest = i;
            break;
        }
    }
    if (earliest == graph.layers.size()) return;  // fully frozen

    TensorF g = grad_logits;
    // walk from the layer feeding the softmax down to the earliest trainable one
    for (std::size_t i = graph.layers.size() - 1; i-- > earliest;) {
        const auto& layer = graph.layers[i];
        const auto& act = trace.activations[i];
        switch (layer.kind) {
        case LayerKind::conv2d: {
            auto cg = conv2d_backward(g, act.input,
                                      param(graph, layer.name + ".weight"), layer.conv);
            if (layer.trainable) {
                accumulate(grads, layer.name + ".weight", std::move(cg.weights));
                accumulate(grads, layer.name + ".bias", std::move(cg.bias));
            }
            g = std::move(cg.input);
            break;
        }
        case LayerKind::maxpool:
            g = maxpool2d_backward(g, act.pool_argmax, act.input.dims());
            break;
        case LayerKind::dense: {
            auto dg = dense_backward(g, act.input, param(graph, layer.name + ".weight"));
            if (layer.trainable) {
                accumulate(grads, layer.name + ".weight", std::move(dg.weights));
                accumulate(grads, layer.name + ".bias", std::move(dg.bias));
            }
            g = std::move(dg.input);
            break;
        }
        case LayerKind::relu:
            g = relu_backward(g, act.input);
            break;
        case LayerKind::dropout:
            if (!act.dropout_mask.empty()) {
                g = dropout_backward(g, act.dropout_mask, layer.rate);
            }
            break;
        case LayerKind::flatten:
            g = g.reshaped(act.input.dims());
            break;
        case LayerKind::gap:
            g = global_average_pool_backward(g, act.input.dims());
            break;
        case LayerKind::batchnorm:
            throw Error("layer '" + layer.name +
                        "': batchnorm is inference-only and cannot be differentiated; "
                        "keep layers beneath it frozen");
        case LayerKind::residual:
            throw Error("layer '" + layer.name +
                        "': residual blocks are inference-only and cannot be "
                        "differentiated; keep them frozen");
        case LayerKind::softmax:
            throw Error("unexpected interior softmax layer '" + layer.name + "'");
        }
    }
}

std::size_t count_parameters(const ModelGraph& graph, bool trainable_only) {
    return count_walk(graph, graph.layers, trainable_only);
}

void freeze_layers(ModelGraph& graph,
                   const std::function<bool(const LayerSpec&)>& predicate) {
    freeze_walk(graph.layers, predicate);
}

} // namespace ddcnn
