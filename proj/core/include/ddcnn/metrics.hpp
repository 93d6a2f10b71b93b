#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ddcnn/dataset.hpp"
#include "ddcnn/graph.hpp"
#include "ddcnn/preprocess.hpp"
#include "ddcnn/tensor.hpp"

namespace ddcnn {

using Confusion = std::vector<std::vector<std::uint64_t>>;  // [true][predicted]

Confusion make_confusion(std::size_t num_classes);

/// Argmax with ties broken toward the lowest class index (deterministic).
std::size_t argmax_class(std::span<const float> probabilities);

double overall_accuracy(const Confusion& confusion);

/// Per-class recall: confusion[k][k] / row_sum(k); an empty class scores 0.
std::vector<double> per_class_accuracy(const Confusion& confusion);

/// Unweighted mean over classes of 2PR/(P+R), with the F1 of a class that
/// has neither precision nor recall defined as 0.
double macro_f1(const Confusion& confusion);

struct LatencyStats {
    double mean_s = 0.0;
    double p95_s = 0.0;
    double max_s = 0.0;
};

/// mean / p95 / max of per-image wall-clock seconds; p95 is the value at
/// sorted index ceil(0.95*n) - 1.
LatencyStats latency_stats_from_samples(std::vector<double> seconds);

struct EvalReport {
    Confusion confusion;                    // 10x10, rows = true class
    std::uint64_t sample_count = 0;
    double overall = 0.0;
    std::vector<double> per_class;          // 10 recalls
    double macro_f1 = 0.0;
    LatencyStats latency;                   // per-image predict time

    std::string to_json_string() const;
    void write_json(const std::filesystem::path& path) const;
    void write_confusion_csv(const std::filesystem::path& path) const;
};

EvalReport report_from_confusion(Confusion confusion, LatencyStats latency = {});

using PredictFn = std::function<TensorF(const TensorF&)>;

/// Runs a predictor over every indexed image (no augmentation; evaluation
/// batches are never augmented) and accumulates the confusion matrix.
/// Samples are processed in parallel chunks with a deterministic reduction
/// order. num_threads <= 0 picks the hardware concurrency.
EvalReport evaluate_predictor(const PredictFn& predict, const DatasetIndex& index,
                              const Preprocessor& preprocessing,
                              const std::filesystem::path& dataset_root,
                              int num_threads = 0);

EvalReport evaluate(const ModelGraph& model, const DatasetIndex& index,
                    const Preprocessor& preprocessing,
                    const std::filesystem::path& dataset_root, int num_threads = 0);

} // namespace ddcnn
