#pragma once

#include <array>
#include <cstddef>

#include "ddcnn/graph.hpp"

namespace ddcnn {

inline constexpr std::size_t kNumClasses = 10;

enum class CnnVariant { base, optimized };

struct CnnConfig {
    std::size_t input_channels = 1;  // grayscale by default
    std::size_t input_size = 64;
    std::array<std::size_t, 4> conv_filters = {32, 64, 128, 256};
    std::size_t hidden_units = 512;
    double dropout_rate = 0.5;
};

/// Four-conv sequential classifier, two flavours:
///   base:      4 pools, dropout after flatten and after the hidden dense,
///              glorot_normal default init
///   optimized: 3 pools, a single dropout, he_normal default init
ModelGraph build_paper_cnn(CnnVariant variant, const CnnConfig& config = {});

enum class VggHead { linear_probe, optimized_head };

struct VggConfig {
    std::size_t input_size = 224;     // must be divisible by 32
    std::size_t hidden_units = 512;   // optimized_head only
    bool gap_head = true;             // false: flatten instead of GAP
    double dropout_rate = 0.5;        // optimized_head only
};

/// VGG16 configuration-D backbone (13 convs / 5 pools), frozen, plus a
/// trainable head:
///   linear_probe:   GAP(512) -> dense(10) -> softmax (5,130 trainable)
///   optimized_head: GAP-or-flatten -> dense(hidden) -> relu ->
///                   dropout -> dense(10) -> softmax
ModelGraph build_vgg16(VggHead head, const VggConfig& config = {});

struct ResNetConfig {
    std::size_t input_size = 224;  // must be >= 32
};

/// 50-layer bottleneck residual backbone, frozen with batchnorm in
/// inference mode, plus a trainable GAP(2048) -> dense(10) -> softmax head
/// (20,490 trainable parameters).
ModelGraph build_resnet50(const ResNetConfig& config = {});

} // namespace ddcnn
