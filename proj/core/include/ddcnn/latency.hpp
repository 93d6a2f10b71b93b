#pragma once

#include <filesystem>

#include "ddcnn/graph.hpp"
#include "ddcnn/metrics.hpp"
#include "ddcnn/preprocess.hpp"

namespace ddcnn {

struct LatencyReport {
    LatencyStats stats;
    double budget_s = 1.0;
    int warmup = 10;
    int iterations = 100;
    bool within_budget = false;  // mean < budget
};

/// Times the single-image predict path (decode + preprocess + forward,
/// batch 1) over `iterations` runs after `warmup` unmeasured runs.
LatencyReport benchmark_latency(const ModelGraph& model,
                                const std::filesystem::path& image_path,
                                const Preprocessor& preprocessing, int warmup = 10,
                                int iterations = 100, double budget_s = 1.0);

} // namespace ddcnn
