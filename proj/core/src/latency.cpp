#include "ddcnn/latency.hpp"

#include <chrono>

#include "ddcnn/errors.hpp"

namespace ddcnn {

LatencyReport benchmark_latency(const ModelGraph& model,
                                const std::filesystem::path& image_path,
                                const Preprocessor& preprocessing, int warmup,
                                int iterations, double budget_s) {
    if (warmup < 0 || iterations < 1) {
        throw ConfigError("latency benchmark needs warmup >= 0 and iterations >= 1");
    }

    auto run_once = [&] {
        const TensorF input = preprocessing.load(image_path);
        return model.forward(input);
    };

    for (int i = 0; i < warmup; ++i) run_once();

    std::vector<double> seconds;
    seconds.reserve(static_cast<std::size_t>(iterations));
    for (int i = 0; i < iterations; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        run_once();
        const auto t1 = std::chrono::steady_clock::now();
        seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }

    LatencyReport report;
    report.budget_s = budget_s;
    report.warmup = warmup;
    report.iterations = iterations;
    report.stats = latency_stats_from_samples(std::move(seconds));
    report.within_budget = report.stats.mean_s < budget_s;
    return report;
}

} // namespace ddcnn
