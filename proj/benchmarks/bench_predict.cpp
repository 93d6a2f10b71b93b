#include <benchmark/benchmark.h>

#include "ddcnn/architectures.hpp"
#include "ddcnn/initializers.hpp"
#include "ddcnn/rng.hpp"

using namespace ddcnn;

namespace {

TensorF random_image(std::size_t channels, std::size_t size) {
    Rng rng(7);
    TensorF image({channels, size, size});
    for (std::size_t i = 0; i < image.size(); ++i) {
        image[i] = static_cast<float>(rng.uniform(0.0, 1.0));
    }
    return image;
}

// end-to-end single-image forward pass per model variant
void BM_PredictCnnBase(benchmark::State& state) {
    auto model = build_paper_cnn(CnnVariant::base);
    initialize(model, 1);
    auto image = random_image(1, 64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward(image));
    }
}

void BM_PredictCnnOptimized(benchmark::State& state) {
    auto model = build_paper_cnn(CnnVariant::optimized);
    initialize(model, 1);
    auto image = random_image(1, 64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward(image));
    }
}

void BM_PredictVgg16(benchmark::State& state) {
    VggConfig config;
    config.input_size = static_cast<std::size_t>(state.range(0));
    auto model = build_vgg16(VggHead::linear_probe, config);
    initialize(model, 1);
    auto image = random_image(3, config.input_size);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward(image));
    }
}

void BM_PredictResNet50(benchmark::State& state) {
    ResNetConfig config;
    config.input_size = static_cast<std::size_t>(state.range(0));
    auto model = build_resnet50(config);
    initialize(model, 1);
    auto image = random_image(3, config.input_size);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward(image));
    }
}

} // namespace

BENCHMARK(BM_PredictCnnBase)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictCnnOptimized)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictVgg16)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictResNet50)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
