#pragma once

#include <cstdint>

#include "ddcnn/graph.hpp"

namespace ddcnn {

struct InitializerSpec {
    InitKind kind = InitKind::glorot_normal;
    std::uint64_t seed = 0;
};

/// Gaussian weight initialization in deterministic layer order:
/// glorot_normal uses std sqrt(2/(fan_in+fan_out)), he_normal sqrt(2/fan_in).
/// Biases are zeroed; batchnorm layers get gamma=1, beta=0, mean=0, var=1.
void initialize(ModelGraph& graph, const InitializerSpec& spec);

/// Same, using the architecture's default initializer kind.
void initialize(ModelGraph& graph, std::uint64_t seed);

} // namespace ddcnn
