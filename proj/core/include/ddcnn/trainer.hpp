#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "ddcnn/augment.hpp"
#include "ddcnn/dataset.hpp"
#include "ddcnn/graph.hpp"
#include "ddcnn/optimizer.hpp"
#include "ddcnn/preprocess.hpp"

namespace ddcnn {

struct TrainConfig {
    int epochs = 25;
    int batch_size = 40;
    double learning_rate = 0.001;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::uint64_t seed = 0;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    void write_csv(const std::filesystem::path& path) const;
};

struct TrainOptions {
    // Set only by the --leaky-split demonstration path; the trainer refuses
    // overlapping driver sets otherwise.
    bool allow_driver_overlap = false;
    int num_threads = 0;  // <= 0: hardware concurrency
    // Called after each epoch; return false to stop early (the reached
    // epochs stay in the history).
    std::function<bool(const EpochStats&)> on_epoch;
};

/// Minibatch training loop: seeded shuffle every epoch, forward/backward
/// per sample, mean-gradient optimizer step per batch. Dropout runs in train
/// mode during training and is the identity during validation; augmentation
/// applies to training batches only. Bit-deterministic for a fixed seed.
TrainHistory train(ModelGraph& model, const DatasetIndex& train_index,
                   const DatasetIndex& val_index, const TrainConfig& config,
                   const AugmentPolicy& augment_policy,
                   const Preprocessor& preprocessing,
                   const std::filesystem::path& dataset_root,
                   const TrainOptions& options = {});

} // namespace ddcnn
