#include <benchmark/benchmark.h>

#include "ddcnn/kernels.hpp"
#include "ddcnn/rng.hpp"

using namespace ddcnn;

namespace {

TensorF random_tensor(Rng& rng, std::vector<std::size_t> dims) {
    TensorF t(std::move(dims));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    return t;
}

void BM_Conv2dIm2col(benchmark::State& state) {
    const auto channels = static_cast<std::size_t>(state.range(0));
    const auto size = static_cast<std::size_t>(state.range(1));
    Rng rng(1);
    auto input = random_tensor(rng, {channels, size, size});
    auto weights = random_tensor(rng, {channels * 2, channels, 3, 3});
    auto bias = random_tensor(rng, {channels * 2});
    const ConvParams params{3, 3, static_cast<int>(channels),
                            static_cast<int>(channels * 2), 1, 1};
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_forward(input, weights, bias, params));
    }
    state.SetItemsProcessed(state.iterations());
}

void BM_Conv2dNaive(benchmark::State& state) {
    const auto channels = static_cast<std::size_t>(state.range(0));
    const auto size = static_cast<std::size_t>(state.range(1));
    Rng rng(1);
    auto input = random_tensor(rng, {channels, size, size});
    auto weights = random_tensor(rng, {channels * 2, channels, 3, 3});
    auto bias = random_tensor(rng, {channels * 2});
    const ConvParams params{3, 3, static_cast<int>(channels),
                            static_cast<int>(channels * 2), 1, 1};
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv2d_forward_naive(input, weights, bias, params));
    }
    state.SetItemsProcessed(state.iterations());
}

void BM_Dense(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    auto x = random_tensor(rng, {n});
    auto w = random_tensor(rng, {n / 4, n});
    auto b = random_tensor(rng, {n / 4});
    for (auto _ : state) {
        benchmark::DoNotOptimize(dense_forward(x, w, b));
    }
}

void BM_Softmax(benchmark::State& state) {
    Rng rng(3);
    auto logits = random_tensor(rng, {static_cast<std::size_t>(state.range(0))});
    for (auto _ : state) {
        benchmark::DoNotOptimize(softmax(logits));
    }
}

void BM_MaxPool(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    auto input = random_tensor(rng, {32, size, size});
    for (auto _ : state) {
        benchmark::DoNotOptimize(maxpool2d(input));
    }
}

} // namespace

BENCHMARK(BM_Conv2dIm2col)->Args({16, 32})->Args({32, 32})->Args({64, 16});
BENCHMARK(BM_Conv2dNaive)->Args({16, 32})->Args({32, 32})->Args({64, 16});
BENCHMARK(BM_Dense)->Arg(512)->Arg(4096);
BENCHMARK(BM_Softmax)->Arg(10)->Arg(1000);
BENCHMARK(BM_MaxPool)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
