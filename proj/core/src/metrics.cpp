#include "ddcnn/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "ddcnn/errors.hpp"

namespace ddcnn {

Confusion make_confusion(std::size_t num_classes) {
    return Confusion(num_classes, std::vector<std::uint64_t>(num_classes, 0));
}

std::size_t argmax_class(std::span<const float> probabilities) {
    if (probabilities.empty()) throw ShapeError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i) {
        if (probabilities[i] > probabilities[best]) best = i;
    }
    return best;
}

namespace {

std::uint64_t total_count(const Confusion& confusion) {
    std::uint64_t total = 0;
    for (const auto& row : confusion) {
        for (std::uint64_t v : row) total += v;
    }
    return total;
}

} // namespace

double overall_accuracy(const Confusion& confusion) {
    const std::uint64_t total = total_count(confusion);
    if (total == 0) return 0.0;
    std::uint64_t correct = 0;
    for (std::size_t k = 0; k < confusion.size(); ++k) correct += confusion[k][k];
    return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<double> per_class_accuracy(const Confusion& confusion) {
    std::vector<double> recall(confusion.size(), 0.0);
    for (std::size_t k = 0; k < confusion.size(); ++k) {
        std::uint64_t row_sum = 0;
        for (std::uint64_t v : confusion[k]) row_sum += v;
        if (row_sum > 0) {
            recall[k] = static_cast<double>(confusion[k][k]) /
                        static_cast<double>(row_sum);
        }
    }
    return recall;
}

double macro_f1(const Confusion& confusion) {
    const std::size_t K = confusion.size();
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        std::uint64_t tp = confusion[k][k], fp = 0, fn = 0;
        for (std::size_t r = 0; r < K; ++r) {
            if (r == k) continue;
            fp += confusion[r][k];
            fn += confusion[k][r];
        }
        const double precision =
            (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double recall =
            (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f1 = (precision + recall > 0.0)
                              ? 2.0 * precision * recall / (precision + recall)
                              : 0.0;
        sum += f1;
    }
    return K ? sum / static_cast<double>(K) : 0.0;
}

LatencyStats latency_stats_from_samples(std::vector<double> seconds) {
    LatencyStats stats;
    if (seconds.empty()) return stats;
    std::sort(seconds.begin(), seconds.end());
    double sum = 0.0;
    for (double s : seconds) sum += s;
    stats.mean_s = sum / static_cast<double>(seconds.size());
    const auto p95_index = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(seconds.size())));
    stats.p95_s = seconds[std::max<std::size_t>(p95_index, 1) - 1];
    stats.max_s = seconds.back();
    return stats;
}

EvalReport report_from_confusion(Confusion confusion, LatencyStats latency) {
    EvalReport report;
    report.sample_count = total_count(confusion);
    report.overall = overall_accuracy(confusion);
    report.per_class = per_class_accuracy(confusion);
    report.macro_f1 = ddcnn::macro_f1(confusion);
    report.latency = latency;
    report.confusion = std::move(confusion);
    return report;
}

std::string EvalReport::to_json_string() const {
    nlohmann::json j;
    j["sample_count"] = sample_count;
    j["overall_accuracy"] = overall;
    j["macro_f1"] = macro_f1;
    nlohmann::json per;
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        per[std::string("c") + std::to_string(k)] = per_class[k];
    }
    j["per_class_accuracy"] = per;
    j["confusion"] = confusion;
    j["latency"] = {{"mean_s", latency.mean_s},
                    {"p95_s", latency.p95_s},
                    {"max_s", latency.max_s}};
    return j.dump(2);
}

void EvalReport::write_json(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write report '" + path.string() + "'");
    out << to_json_string() << "\n";
}

void EvalReport::write_confusion_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write confusion matrix '" + path.string() + "'");
    out << "true";
    for (std::size_t k = 0; k < confusion.size(); ++k) out << ",c" << k;
    out << "\n";
    for (std::size_t r = 0; r < confusion.size(); ++r) {
        out << "c" << r;
        for (std::uint64_t v : confusion[r]) out << "," << v;
        out << "\n";
    }
}

EvalReport evaluate_predictor(const PredictFn& predict, const DatasetIndex& index,
                              const Preprocessor& preprocessing,
                              const std::filesystem::path& dataset_root,
                              int num_threads) {
    if (index.empty()) throw DataError("cannot evaluate an empty dataset index");

    const std::size_t n = index.size();
    if (num_threads <= 0) {
        num_threads = static_cast<int>(std::thread::hardware_concurrency());
        if (num_threads <= 0) num_threads = 1;
    }
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(num_threads), n);

    struct Partial {
        Confusion confusion;
        std::vector<double> seconds;
    };
    std::vector<Partial> partials(workers);
    for (auto& p : partials) p.confusion = make_confusion(10);

    auto run_range = [&](std::size_t begin, std::size_t end, Partial& partial) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& row = index.rows[i];
            const int true_class = class_index(row.label);
            if (true_class < 0) {
                throw DataError("row " + std::to_string(i) + " has unknown label '" +
                                row.label + "'");
            }
            const auto t0 = std::chrono::steady_clock::now();
            const TensorF input = preprocessing.load(dataset_root / row.image_path);
            const TensorF probs = predict(input);
            const auto t1 = std::chrono::steady_clock::now();
            if (probs.rank() != 1 || probs.size() != 10) {
                throw ShapeError("predictor must return a length-10 probability vector");
            }
            const std::size_t predicted =
                argmax_class({probs.data(), probs.size()});
            ++partial.confusion[static_cast<std::size_t>(true_class)][predicted];
            partial.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
    };

    if (workers == 1) {
        run_range(0, n, partials[0]);
    } else {
        std::vector<std::thread> threads;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            threads.emplace_back([&, begin, end, w] {
                try {
                    run_range(begin, end, partials[w]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    // fixed chunk order keeps the reduction deterministic
    Confusion confusion = make_confusion(10);
    std::vector<double> seconds;
    seconds.reserve(n);
    for (const auto& partial : partials) {
        for (std::size_t r = 0; r < 10; ++r) {
            for (std::size_t c = 0; c < 10; ++c) {
                confusion[r][c] += partial.confusion[r][c];
            }
        }
        seconds.insert(seconds.end(), partial.seconds.begin(), partial.seconds.end());
    }
    return report_from_confusion(std::move(confusion),
                                 latency_stats_from_samples(std::move(seconds)));
}

EvalReport evaluate(const ModelGraph& model, const DatasetIndex& index,
                    const Preprocessor& preprocessing,
                    const std::filesystem::path& dataset_root, int num_threads) {
    return evaluate_predictor(
        [&model](const TensorF& input) { return model.forward(input); }, index,
        preprocessing, dataset_root, num_threads);
}

} // namespace ddcnn
