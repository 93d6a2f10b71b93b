#include "ddcnn/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "ddcnn/errors.hpp"
#include "ddcnn/loss.hpp"
#include "ddcnn/metrics.hpp"

namespace ddcnn {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5F;
constexpr std::uint64_t kAugmentStream = 0xA6;
constexpr std::uint64_t kDropoutStream = 0xD7;

struct SampleResult {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    GradMap grads;
};

void merge_grads(GradMap& into, GradMap& from) {
    for (auto& [name, grad] : from) {
        auto it = into.find(name);
        if (it == into.end()) {
            into.emplace(name, std::move(grad));
        } else {
            for (std::size_t i = 0; i < grad.size(); ++i) it->second[i] += grad[i];
        }
    }
}

} // namespace

void TrainHistory::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write history '" + path.string() + "'");
    out << "epoch,train_loss,train_acc,val_acc\n";
    char line[128];
    for (const auto& e : epochs) {
        std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f\n", e.epoch,
                      e.train_loss, e.train_accuracy, e.val_accuracy);
        out << line;
    }
}

TrainHistory train(ModelGraph& model, const DatasetIndex& train_index,
                   const DatasetIndex& val_index, const TrainConfig& config,
                   const AugmentPolicy& augment_policy,
                   const Preprocessor& preprocessing,
                   const std::filesystem::path& dataset_root,
                   const TrainOptions& options) {
    if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (static_cast<std::size_t>(config.batch_size) > train_index.size()) {
        throw ConfigError("batch size " + std::to_string(config.batch_size) +
                          " exceeds the training set size " +
                          std::to_string(train_index.size()));
    }
    if (train_index.empty() || val_index.empty()) {
        throw DataError("training and validation splits must be non-empty");
    }
    if (model.layers.empty() || model.layers.back().kind != LayerKind::softmax) {
        throw ConfigError("training expects a model with a terminal softmax");
    }

    if (!options.allow_driver_overlap) {
        // the leakage guard: a driver must never appear on both sides
        const auto train_drivers = train_index.drivers();
        for (const auto& driver : val_index.drivers()) {
            if (train_drivers.count(driver)) {
                throw DataError("driver '" + driver +
                                "' appears in both train and validation splits");
            }
        }
    }

    int num_threads = options.num_threads;
    if (num_threads <= 0) {
        num_threads = static_cast<int>(std::thread::hardware_concurrency());
        if (num_threads <= 0) num_threads = 1;
    }

    const Rng master(config.seed);
    Optimizer optimizer(config.optimizer, config.learning_rate);
    const std::size_t n = train_index.size();

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    // one sample's forward/backward; rngs are derived from (seed, epoch,
    // shuffled position) so the result is independent of thread scheduling
    auto process_sample = [&](int epoch, std::size_t position, SampleResult& out) {
        const auto& row = train_index.rows[order[position]];
        const int true_class = class_index(row.label);
        if (true_class < 0) {
            throw DataError("training row has unknown label '" + row.label + "'");
        }

        TensorF input;
        if (augment_policy.enabled) {
            Rng augment_rng = master.fork(kAugmentStream)
                                  .fork(static_cast<std::uint64_t>(epoch))
                                  .fork(position);
            input = preprocessing.load_augmented(dataset_root / row.image_path,
                                                 augment_policy, augment_rng);
        } else {
            input = preprocessing.load(dataset_root / row.image_path);
        }

        Rng dropout_rng = master.fork(kDropoutStream)
                              .fork(static_cast<std::uint64_t>(epoch))
                              .fork(position);
        const ForwardTrace trace =
            forward_trace(model, input, RunMode::train, &dropout_rng);
        out.loss_sum +=
            cross_entropy(trace.output, static_cast<std::size_t>(true_class));
        if (argmax_class({trace.output.data(), trace.output.size()}) ==
            static_cast<std::size_t>(true_class)) {
            ++out.correct;
        }
        const TensorF grad_logits = cross_entropy_softmax_grad(
            trace.output, static_cast<std::size_t>(true_class));
        backward_into(model, trace, grad_logits, out.grads);
    };

    TrainHistory history;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng shuffle_rng =
            master.fork(kShuffleStream).fork(static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order.begin(), order.end());

        double epoch_loss = 0.0;
        std::size_t epoch_correct = 0;

        for (std::size_t batch_begin = 0; batch_begin < n;
             batch_begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t batch_end =
                std::min(n, batch_begin + static_cast<std::size_t>(config.batch_size));
            const std::size_t batch_count = batch_end - batch_begin;
            const std::size_t workers = std::min<std::size_t>(
                static_cast<std::size_t>(num_threads), batch_count);

            std::vector<SampleResult> partials(workers);
            if (workers == 1) {
                for (std::size_t s = batch_begin; s < batch_end; ++s) {
                    process_sample(epoch, s, partials[0]);
                }
            } else {
                std::vector<std::thread> threads;
                std::exception_ptr failure;
                std::mutex failure_mutex;
                const std::size_t chunk = (batch_count + workers - 1) / workers;
                for (std::size_t w = 0; w < workers; ++w) {
                    const std::size_t begin = batch_begin + w * chunk;
                    const std::size_t end = std::min(batch_end, begin + chunk);
                    threads.emplace_back([&, begin, end, w] {
                        try {
                            for (std::size_t s = begin; s < end; ++s) {
                                process_sample(epoch, s, partials[w]);
                            }
                        } catch (...) {
                            std::lock_guard<std::mutex> lock(failure_mutex);
                            if (!failure) failure = std::current_exception();
                        }
                    });
                }
                for (auto& t : threads) t.join();
                if (failure) std::rethrow_exception(failure);
            }

            GradMap batch_grads;
            for (auto& partial : partials) {
                epoch_loss += partial.loss_sum;
                epoch_correct += partial.correct;
                merge_grads(batch_grads, partial.grads);
            }
            const float inv = 1.0f / static_cast<float>(batch_count);
            for (auto& [name, grad] : batch_grads) {
                (void)name;
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= inv;
            }
            optimizer.step(model.parameters, batch_grads);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss / static_cast<double>(n);
        stats.train_accuracy =
            static_cast<double>(epoch_correct) / static_cast<double>(n);
        stats.val_accuracy =
            evaluate(model, val_index, preprocessing, dataset_root, num_threads)
                .overall;
        history.epochs.push_back(stats);
        if (options.on_epoch && !options.on_epoch(stats)) break;
    }
    return history;
}

} // namespace ddcnn
