#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ddcnn/kernels.hpp"
#include "ddcnn/rng.hpp"
#include "ddcnn/tensor.hpp"

namespace ddcnn {

enum class LayerKind {
    conv2d,
    maxpool,
    dense,
    relu,
    softmax,
    dropout,
    batchnorm,
    flatten,
    gap,
    residual,
};

enum class InitKind { glorot_normal, he_normal };

/// Declarative description of one layer. Parameter tensors live in the
/// owning ModelGraph under keys derived from `name` (e.g. "conv1.weight").
struct LayerSpec {
    LayerKind kind{};
    std::string name;
    bool trainable = true;

    ConvParams conv{};  // conv2d
    std::size_t units = 0;  // dense output width
    double rate = 0.5;  // dropout

    // residual: out = relu(body(x) + shortcut(x)); empty shortcut = identity
    std::vector<LayerSpec> body;
    std::vector<LayerSpec> shortcut;

    bool has_parameters() const {
        return kind == LayerKind::conv2d || kind == LayerKind::dense ||
               kind == LayerKind::batchnorm;
    }
};

/// Sequential model graph (plus residual blocks) with named parameters.
/// Building is done by the architecture factories; `bind_parameters`
/// validates shape compatibility end to end and allocates every tensor.
struct ModelGraph {
    std::string name;
    std::array<std::size_t, 3> input_dims{};  // C, H, W
    std::vector<LayerSpec> layers;
    std::map<std::string, TensorF> parameters;
    InitKind default_init = InitKind::glorot_normal;

    TensorF forward(const TensorF& input, RunMode mode = RunMode::infer,
                    Rng* dropout_rng = nullptr) const;
};

/// Validates layer-to-layer shape compatibility for the declared input dims
/// and allocates zero-filled parameter tensors. Throws ShapeError /
/// ConfigError with the offending layer named.
void bind_parameters(ModelGraph& graph);

std::size_t count_parameters(const ModelGraph& graph, bool trainable_only);

/// Sets trainable=false on every layer (recursing into residual blocks)
/// matched by the predicate.
void freeze_layers(ModelGraph& graph,
                   const std::function<bool(const LayerSpec&)>& predicate);

/// Per-layer activations captured during a training-mode forward pass;
/// everything the backward pass needs to replay the graph.
struct LayerActivation {
    TensorF input;
    std::vector<std::uint8_t> dropout_mask;
    std::vector<std::size_t> pool_argmax;
};

struct ForwardTrace {
    std::vector<LayerActivation> activations;  // parallel to graph.layers
    TensorF output;                            // terminal probabilities
};

ForwardTrace forward_trace(const ModelGraph& graph, const TensorF& input,
                           RunMode mode, Rng* dropout_rng);

using GradMap = std::map<std::string, TensorF>;

/// Backpropagates from the gradient at the terminal softmax's *input*
/// (i.e. the fused softmax + cross-entropy gradient) and accumulates
/// parameter gradients for trainable layers into `grads` (+=). The walk
/// stops below the earliest trainable layer, so frozen backbones are never
/// differentiated.
void backward_into(const ModelGraph& graph, const ForwardTrace& trace,
                   const TensorF& grad_logits, GradMap& grads);

} // namespace ddcnn
