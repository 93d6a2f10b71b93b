#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ddcnn/architectures.hpp"
#include "ddcnn/augment.hpp"
#include "ddcnn/graph.hpp"
#include "ddcnn/preprocess.hpp"
#include "ddcnn/trainer.hpp"

namespace ddcnn::cli {

/// Flat key=value run configuration. Precedence: command-line flags beat
/// config-file values, which beat the defaults below (0 means "use the
/// model's default" for input_size / epochs / batch_size).
struct RunConfig {
    std::string dataset_root;
    std::string manifest;
    std::string output_dir = "out";
    std::string model = "cnn";  // cnn | cnn-opt | vgg16 | vgg16-opt | resnet50
    int input_size = 0;
    int epochs = 0;
    int batch_size = 0;
    double learning_rate = 0.001;
    std::string optimizer = "adam";  // sgd | adam
    std::uint64_t seed = 0;
    double val_fraction = 0.2;
    bool augment = true;
    double augment_rotation_deg = 10.0;
    double augment_shift_frac = 0.1;
    double augment_brightness_frac = 0.1;
    std::string cnn_filters = "32,64,128,256";
    int hidden_units = 512;
    std::string vgg_head_pool = "gap";  // gap | flatten
    double latency_budget_seconds = 1.0;
    bool leaky_split = false;
};

/// Optional per-flag overrides gathered from the command line.
struct Overrides {
    std::optional<std::string> dataset_root, manifest, output_dir, model, optimizer,
        cnn_filters, vgg_head_pool;
    std::optional<int> input_size, epochs, batch_size, hidden_units;
    std::optional<double> learning_rate, val_fraction, augment_rotation_deg,
        augment_shift_frac, augment_brightness_frac, latency_budget_seconds;
    std::optional<std::uint64_t> seed;
    std::optional<bool> augment, leaky_split;
};

/// Parses `key = value` lines ('#' starts a comment). Unknown keys are
/// rejected with their line number.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

void apply_overrides(RunConfig& config, const Overrides& overrides);

/// Rejects out-of-range values and unknown enumerations.
void validate(const RunConfig& config);

/// The fully-resolved configuration in config-file syntax; written next to
/// every run's outputs.
std::string resolved_text(const RunConfig& config);

/// Everything the commands need that depends on the model choice.
struct ResolvedModel {
    ModelGraph graph;
    Preprocessor preprocessing;
    int epochs = 0;
    int batch_size = 0;
};

ResolvedModel build_model(const RunConfig& config);

TrainConfig train_config(const RunConfig& config, const ResolvedModel& resolved);
AugmentPolicy augment_policy(const RunConfig& config);

} // namespace ddcnn::cli
