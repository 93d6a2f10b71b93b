#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ddcnn/gradcheck.hpp"
#include "ddcnn/kernels.hpp"
#include "ddcnn/loss.hpp"
#include "test_util.hpp"

using namespace ddcnn;

namespace {

constexpr double kTolerance = 1e-4;

// L = sum(grad_out .* f(inputs)): the scalar probe every backward kernel is
// checked against.
double weighted_sum(const TensorD& weights_like, const TensorD& value) {
    double sum = 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
        sum += weights_like[i] * value[i];
    }
    return sum;
}

} // namespace

TEST_CASE("conv2d backward passes finite-difference checks") {
    Rng rng(101);
    for (int iter = 0; iter < 20; ++iter) {
        ConvParams p;
        p.in_channels = 1 + static_cast<int>(rng.below(2));
        p.out_channels = 1 + static_cast<int>(rng.below(2));
        p.kernel_h = 1 + static_cast<int>(rng.below(3));
        p.kernel_w = 1 + static_cast<int>(rng.below(3));
        p.stride = 1 + static_cast<int>(rng.below(2));
        p.padding = static_cast<int>(rng.below(2));
        const std::size_t h = p.kernel_h + rng.below(4);
        const std::size_t w = p.kernel_w + rng.below(4);

        auto input = testutil::random_tensor<double>(
            rng, {static_cast<std::size_t>(p.in_channels), h, w});
        auto weights = testutil::random_tensor<double>(
            rng, {static_cast<std::size_t>(p.out_channels),
                  static_cast<std::size_t>(p.in_channels),
                  static_cast<std::size_t>(p.kernel_h),
                  static_cast<std::size_t>(p.kernel_w)});
        auto bias = testutil::random_tensor<double>(
            rng, {static_cast<std::size_t>(p.out_channels)});
        auto probe = testutil::random_tensor<double>(
            rng, conv2d_forward(input, weights, bias, p).dims());

        auto grads = conv2d_backward(probe, input, weights, p);
        auto fn = [&](const std::vector<TensorD>& v) {
            return weighted_sum(probe, conv2d_forward(v[0], v[1], v[2], p));
        };
        auto report = finite_difference_check(fn, {input, weights, bias},
                                              {grads.input, grads.weights, grads.bias},
                                              kTolerance);
        CHECK(report.passed);
    }
}

TEST_CASE("conv2d grad_bias equals the spatial sum of grad_out") {
    Rng rng(102);
    ConvParams p{3, 3, 2, 3, 1, 1};
    auto input = testutil::random_tensor<double>(rng, {2, 5, 5});
    auto weights = testutil::random_tensor<double>(rng, {3, 2, 3, 3});
    auto grad_out = testutil::random_tensor<double>(rng, {3, 5, 5});
    auto grads = conv2d_backward(grad_out, input, weights, p);
    for (std::size_t o = 0; o < 3; ++o) {
        double sum = 0.0;
        for (std::size_t y = 0; y < 5; ++y)
            for (std::size_t x = 0; x < 5; ++x) sum += grad_out(o, y, x);
        CHECK(grads.bias[o] == doctest::Approx(sum).epsilon(1e-12));
    }
}

TEST_CASE("conv2d backward of a zero gradient is zero") {
    Rng rng(103);
    ConvParams p{3, 3, 1, 2, 1, 1};
    auto input = testutil::random_tensor<double>(rng, {1, 4, 4});
    auto weights = testutil::random_tensor<double>(rng, {2, 1, 3, 3});
    TensorD grad_out({2, 4, 4});
    auto grads = conv2d_backward(grad_out, input, weights, p);
    for (std::size_t i = 0; i < grads.input.size(); ++i) CHECK(grads.input[i] == 0.0);
    for (std::size_t i = 0; i < grads.weights.size(); ++i) CHECK(grads.weights[i] == 0.0);
    for (std::size_t i = 0; i < grads.bias.size(); ++i) CHECK(grads.bias[i] == 0.0);
}

TEST_CASE("dense backward passes finite-difference checks") {
    Rng rng(111);
    for (int iter = 0; iter < 20; ++iter) {
        const std::size_t n = 1 + rng.below(6), m = 1 + rng.below(6);
        auto x = testutil::random_tensor<double>(rng, {n});
        auto w = testutil::random_tensor<double>(rng, {m, n});
        auto b = testutil::random_tensor<double>(rng, {m});
        auto probe = testutil::random_tensor<double>(rng, {m});

        auto grads = dense_backward(probe, x, w);
        auto fn = [&](const std::vector<TensorD>& v) {
            return weighted_sum(probe, dense_forward(v[0], v[1], v[2]));
        };
        auto report = finite_difference_check(fn, {x, w, b},
                                              {grads.input, grads.weights, grads.bias},
                                              kTolerance);
        CHECK(report.passed);
        // linear map: agreement is far tighter than the tolerance
        CHECK(report.max_rel_error < 1e-6);
    }
}

TEST_CASE("dense backward returns the analytic forms") {
    Rng rng(112);
    const std::size_t n = 4, m = 3;
    auto x = testutil::random_tensor<double>(rng, {n});
    auto w = testutil::random_tensor<double>(rng, {m, n});
    auto g = testutil::random_tensor<double>(rng, {m});
    auto grads = dense_backward(g, x, w);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += w(i, j) * g[i];
        CHECK(grads.input[j] == doctest::Approx(acc).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < m; ++i) {
        CHECK(grads.bias[i] == g[i]);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(grads.weights(i, j) == doctest::Approx(g[i] * x[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("relu backward passes finite-difference checks away from 0") {
    Rng rng(121);
    for (int iter = 0; iter < 20; ++iter) {
        const std::size_t n = 1 + rng.below(12);
        TensorD x({n});
        for (std::size_t i = 0; i < n; ++i) {
            // keep a margin so +-h never crosses the kink
            const double magnitude = rng.uniform(0.1, 1.0);
            x[i] = rng.uniform() < 0.5 ? -magnitude : magnitude;
        }
        auto probe = testutil::random_tensor<double>(rng, {n});
        auto grad = relu_backward(probe, x);
        auto fn = [&](const std::vector<TensorD>& v) {
            return weighted_sum(probe, relu(v[0]));
        };
        auto report = finite_difference_check(fn, {x}, {grad}, kTolerance);
        CHECK(report.passed);
    }
}

TEST_CASE("softmax + cross-entropy gradient passes finite differences") {
    Rng rng(131);
    for (int iter = 0; iter < 20; ++iter) {
        const std::size_t k = 2 + rng.below(9);
        auto logits = testutil::random_tensor<double>(rng, {k}, -2.0, 2.0);
        const std::size_t true_class = rng.below(k);

        auto analytic = cross_entropy_softmax_grad(softmax(logits), true_class);
        auto fn = [&](const std::vector<TensorD>& v) {
            return cross_entropy(softmax(v[0]), true_class);
        };
        auto report = finite_difference_check(fn, {logits}, {analytic}, kTolerance);
        CHECK(report.passed);
    }
}

TEST_CASE("fused gradient equals the composed softmax/cross-entropy route") {
    Rng rng(132);
    for (int iter = 0; iter < 20; ++iter) {
        const std::size_t k = 2 + rng.below(9);
        auto logits = testutil::random_tensor<double>(rng, {k}, -3.0, 3.0);
        const std::size_t true_class = rng.below(k);
        auto probs = softmax(logits);

        // composed route: dL/dp through the softmax jacobian
        TensorD grad_probs({k});
        grad_probs[true_class] = -1.0 / std::max(1e-12, probs[true_class]);
        auto composed = softmax_backward(grad_probs, probs);
        auto fused = cross_entropy_softmax_grad(probs, true_class);
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(std::abs(composed[i] - fused[i]) <= 1e-10);
        }
    }
}

TEST_CASE("maxpool backward passes finite-difference checks") {
    Rng rng(141);
    for (int iter = 0; iter < 20; ++iter) {
        const std::size_t c = 1 + rng.below(2);
        const std::size_t h = 2 + rng.below(5);
        const std::size_t w = 2 + rng.below(5);
        // well-separated values keep the argmax stable under +-h probing
        TensorD x({c, h, w});
        std::vector<std::size_t> perm(x.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng.shuffle(perm.begin(), perm.end());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = static_cast<double>(perm[i]) * 0.01;
        }

        auto pooled = maxpool2d(x);
        auto probe = testutil::random_tensor<double>(rng, pooled.output.dims());
        auto grad = maxpool2d_backward(probe, pooled.argmax, x.dims());
        auto fn = [&](const std::vector<TensorD>& v) {
            return weighted_sum(probe, maxpool2d(v[0]).output);
        };
        auto report = finite_difference_check(fn, {x}, {grad}, kTolerance);
        CHECK(report.passed);
    }
}

TEST_CASE("global average pool backward passes finite-difference checks") {
    Rng rng(151);
    for (int iter = 0; iter < 20; ++iter) {
        auto x = testutil::random_tensor<double>(
            rng, {1 + rng.below(3), 1 + rng.below(5), 1 + rng.below(5)});
        auto probe = testutil::random_tensor<double>(rng, {x.dim(0)});
        auto grad = global_average_pool_backward(probe, x.dims());
        auto fn = [&](const std::vector<TensorD>& v) {
            return weighted_sum(probe, global_average_pool(v[0]));
        };
        auto report = finite_difference_check(fn, {x}, {grad}, kTolerance);
        CHECK(report.passed);
    }
}

TEST_CASE("dropout backward is exact for a fixed mask") {
    Rng rng(161);
    auto x = testutil::random_tensor<double>(rng, {64});
    Rng mask_rng(7);
    auto result = dropout_with_mask(x, 0.5, RunMode::train, mask_rng);
    auto probe = testutil::random_tensor<double>(rng, {64});
    auto grad = dropout_backward(probe, result.keep_mask, 0.5);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double expected = result.keep_mask[i] ? probe[i] * 2.0 : 0.0;
        CHECK(grad[i] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("finite_difference_check itself reports linear ops as near-exact") {
    Rng rng(171);
    auto x = testutil::random_tensor<double>(rng, {5});
    auto w = testutil::random_tensor<double>(rng, {4, 5});
    auto b = testutil::random_tensor<double>(rng, {4});
    auto probe = testutil::random_tensor<double>(rng, {4});
    auto grads = dense_backward(probe, x, w);
    auto fn = [&](const std::vector<TensorD>& v) {
        return weighted_sum(probe, dense_forward(v[0], w, b));
    };
    auto report = finite_difference_check(fn, {x}, {grads.input}, 1e-4);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-8);
    CHECK(report.elements_checked == 5);
}
