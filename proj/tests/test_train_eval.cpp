#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "ddcnn/architectures.hpp"
#include "ddcnn/ensemble.hpp"
#include "ddcnn/initializers.hpp"
#include "ddcnn/latency.hpp"
#include "ddcnn/loss.hpp"
#include "ddcnn/metrics.hpp"
#include "ddcnn/optimizer.hpp"
#include "ddcnn/synth.hpp"
#include "ddcnn/trainer.hpp"
#include "test_util.hpp"

using namespace ddcnn;

namespace {

// fixed-output member for ensemble arithmetic: zero dense weights make the
// softmax depend only on the bias vector
ModelGraph fixed_output_model(const std::vector<double>& probs) {
    ModelGraph graph;
    graph.name = "fixed";
    graph.input_dims = {1, 2, 2};
    graph.layers.push_back([] {
        LayerSpec l;
        l.kind = LayerKind::flatten;
        return l;
    }());
    graph.layers.push_back([] {
        LayerSpec l;
        l.kind = LayerKind::dense;
        l.name = "fc";
        l.units = 10;
        return l;
    }());
    graph.layers.push_back([] {
        LayerSpec l;
        l.kind = LayerKind::softmax;
        return l;
    }());
    bind_parameters(graph);
    auto& bias = graph.parameters.at("fc.bias");
    for (std::size_t i = 0; i < 10; ++i) {
        bias[i] = static_cast<float>(std::log(probs[i]));
    }
    return graph;
}

} // namespace

TEST_CASE("cross entropy") {
    TensorD certain({4}, {0.0, 1.0, 0.0, 0.0});
    CHECK(cross_entropy(certain, 1) == doctest::Approx(0.0));

    TensorD uniform({10}, std::vector<double>(10, 0.1));
    CHECK(cross_entropy(uniform, 7) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    CHECK(cross_entropy(uniform, 7) == doctest::Approx(2.302585093).epsilon(1e-9));

    CHECK_THROWS_AS(cross_entropy(uniform, 10), DataError);

    // clipped log keeps a zero probability finite
    CHECK(std::isfinite(cross_entropy(certain, 0)));

    auto grad = cross_entropy_softmax_grad(uniform, 3);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(grad[i] == doctest::Approx(i == 3 ? -0.9 : 0.1).epsilon(1e-12));
    }
}

TEST_CASE("optimizer steps") {
    SUBCASE("sgd analytic update") {
        std::map<std::string, TensorF> params;
        params.emplace("p", TensorF({1}, {1.0f}));
        std::map<std::string, TensorF> grads;
        grads.emplace("p", TensorF({1}, {2.0f}));
        Optimizer opt(OptimizerKind::sgd, 0.001);
        opt.step(params, grads);
        CHECK(params.at("p")[0] == doctest::Approx(0.998).epsilon(1e-7));
    }
    SUBCASE("zero gradient leaves parameters unchanged") {
        for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
            std::map<std::string, TensorF> params;
            params.emplace("p", TensorF({3}, {1.0f, -2.0f, 0.5f}));
            std::map<std::string, TensorF> grads;
            grads.emplace("p", TensorF({3}));
            Optimizer opt(kind, 0.01);
            opt.step(params, grads);
            CHECK(params.at("p")[0] == 1.0f);
            CHECK(params.at("p")[1] == -2.0f);
            CHECK(params.at("p")[2] == 0.5f);
        }
    }
    SUBCASE("adam single step matches the closed form") {
        // scalar quadratic L = 0.5*(p - 3)^2 at p = 1: g = p - 3 = -2
        std::map<std::string, TensorF> params;
        params.emplace("p", TensorF({1}, {1.0f}));
        std::map<std::string, TensorF> grads;
        grads.emplace("p", TensorF({1}, {-2.0f}));
        const double lr = 0.001, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        Optimizer opt(OptimizerKind::adam, lr);
        opt.step(params, grads);
        // by hand: m=(1-b1)g, v=(1-b2)g^2, m_hat=g, v_hat=g^2,
        // update = lr*g/(|g|+eps)
        const double g = -2.0;
        const double m_hat = ((1 - beta1) * g) / (1 - beta1);
        const double v_hat = ((1 - beta2) * g * g) / (1 - beta2);
        const double expected = 1.0 - lr * m_hat / (std::sqrt(v_hat) + eps);
        CHECK(params.at("p")[0] == doctest::Approx(expected).epsilon(1e-6));
        CHECK(params.at("p")[0] == doctest::Approx(1.001).epsilon(1e-6));
    }
    SUBCASE("frozen parameters without gradients are untouched") {
        std::map<std::string, TensorF> params;
        params.emplace("trainable", TensorF({1}, {1.0f}));
        params.emplace("frozen", TensorF({1}, {5.0f}));
        std::map<std::string, TensorF> grads;
        grads.emplace("trainable", TensorF({1}, {1.0f}));
        Optimizer opt(OptimizerKind::sgd, 0.1);
        opt.step(params, grads);
        CHECK(params.at("frozen")[0] == 5.0f);
        CHECK(params.at("trainable")[0] == doctest::Approx(0.9f));
    }
    SUBCASE("shape mismatch raises") {
        std::map<std::string, TensorF> params;
        params.emplace("p", TensorF({2}));
        std::map<std::string, TensorF> grads;
        grads.emplace("p", TensorF({3}));
        Optimizer opt(OptimizerKind::sgd, 0.1);
        CHECK_THROWS_AS(opt.step(params, grads), ShapeError);
    }
}

TEST_CASE("confusion metrics") {
    SUBCASE("two-class reduction by hand") {
        Confusion confusion{{3, 1}, {2, 4}};
        CHECK(overall_accuracy(confusion) == doctest::Approx(0.7).epsilon(1e-12));
        auto recall = per_class_accuracy(confusion);
        CHECK(recall[0] == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(recall[1] == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
        // class 0: P=3/5, R=3/4, F1=2PR/(P+R); class 1: P=4/5, R=4/6
        const double f1_0 = 2.0 * (3.0 / 5.0) * (3.0 / 4.0) / (3.0 / 5.0 + 3.0 / 4.0);
        const double f1_1 = 2.0 * (4.0 / 5.0) * (4.0 / 6.0) / (4.0 / 5.0 + 4.0 / 6.0);
        CHECK(macro_f1(confusion) == doctest::Approx((f1_0 + f1_1) / 2.0).epsilon(1e-12));
    }
    SUBCASE("perfect diagonal") {
        auto confusion = make_confusion(10);
        for (std::size_t k = 0; k < 10; ++k) confusion[k][k] = 5;
        auto report = report_from_confusion(confusion);
        CHECK(report.overall == 1.0);
        CHECK(report.macro_f1 == 1.0);
        for (double r : report.per_class) CHECK(r == 1.0);
        CHECK(report.sample_count == 50);
    }
    SUBCASE("constant predictor on balanced data scores 1/K") {
        auto confusion = make_confusion(10);
        for (std::size_t k = 0; k < 10; ++k) confusion[k][0] = 8;
        CHECK(overall_accuracy(confusion) == doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("empty classes score zero recall and zero F1") {
        auto confusion = make_confusion(10);
        confusion[0][0] = 4;  // only class 0 present, perfectly predicted
        auto recall = per_class_accuracy(confusion);
        CHECK(recall[0] == 1.0);
        for (std::size_t k = 1; k < 10; ++k) CHECK(recall[k] == 0.0);
        CHECK(macro_f1(confusion) == doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("weighted identity ties overall to per-class recalls") {
        Rng rng(77);
        for (int iter = 0; iter < 30; ++iter) {
            auto confusion = make_confusion(10);
            std::uint64_t total = 0;
            for (auto& row : confusion) {
                for (auto& cell : row) {
                    cell = rng.below(12);
                    total += cell;
                }
            }
            if (total == 0) continue;
            const auto recall = per_class_accuracy(confusion);
            double weighted = 0.0;
            for (std::size_t k = 0; k < 10; ++k) {
                std::uint64_t row_sum = 0;
                for (auto cell : confusion[k]) row_sum += cell;
                weighted += static_cast<double>(row_sum) / static_cast<double>(total) *
                            recall[k];
            }
            CHECK(overall_accuracy(confusion) ==
                  doctest::Approx(weighted).epsilon(1e-12));
        }
    }
    SUBCASE("argmax ties break to the lowest class index") {
        std::vector<float> probs{0.2f, 0.3f, 0.3f, 0.2f};
        CHECK(argmax_class(probs) == 1);
        std::vector<float> flat{0.25f, 0.25f, 0.25f, 0.25f};
        CHECK(argmax_class(flat) == 0);
    }
}

TEST_CASE("latency statistics") {
    SUBCASE("single sample is its own mean, p95, and max") {
        auto stats = latency_stats_from_samples({0.125});
        CHECK(stats.mean_s == 0.125);
        CHECK(stats.p95_s == 0.125);
        CHECK(stats.max_s == 0.125);
    }
    SUBCASE("max dominates the mean") {
        auto stats = latency_stats_from_samples({0.1, 0.2, 0.3, 0.4});
        CHECK(stats.mean_s == doctest::Approx(0.25));
        CHECK(stats.max_s == 0.4);
        CHECK(stats.max_s >= stats.mean_s);
        CHECK(stats.mean_s >= 0.0);
        CHECK(stats.p95_s == 0.4);  // ceil(0.95*4)-1 = index 3
    }
}

TEST_CASE("evaluate over a synthetic corpus") {
    testutil::TempDir dir;
    SynthOptions options;
    options.noise_amplitude = 0;
    auto index = synth_dataset(dir.path(), 3, 2, 11, options);
    Preprocessor pre{1, 64, 64};

    SUBCASE("a block-detector predictor is perfect and reports it") {
        // rule-based oracle predictor: brightest class block wins
        PredictFn predictor = [](const TensorF& input) {
            TensorF probs({10});
            double best = -1.0;
            std::size_t best_k = 0;
            for (int k = 0; k < 10; ++k) {
                const auto block = synth_class_block(k, 64);
                double sum = 0.0;
                for (int y = block.y0; y < block.y0 + block.size; ++y)
                    for (int x = block.x0; x < block.x0 + block.size; ++x)
                        sum += input(0, static_cast<std::size_t>(y),
                                     static_cast<std::size_t>(x));
                if (sum > best) {
                    best = sum;
                    best_k = static_cast<std::size_t>(k);
                }
            }
            probs[best_k] = 1.0f;
            return probs;
        };
        auto report = evaluate_predictor(predictor, index, pre, dir.path());
        CHECK(report.overall == 1.0);
        CHECK(report.macro_f1 == 1.0);
        CHECK(report.sample_count == index.size());
        for (std::size_t k = 0; k < 10; ++k) {
            CHECK(report.per_class[k] == 1.0);
            CHECK(report.confusion[k][k] == index.size() / 10);
        }
        CHECK(report.latency.mean_s >= 0.0);
        CHECK(report.latency.max_s >= report.latency.mean_s);
    }
    SUBCASE("a constant predictor scores 1/K on the balanced corpus") {
        PredictFn constant = [](const TensorF&) {
            TensorF probs({10});
            probs[0] = 1.0f;
            return probs;
        };
        auto report = evaluate_predictor(constant, index, pre, dir.path());
        CHECK(report.overall == doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("empty index is an error") {
        DatasetIndex empty;
        CHECK_THROWS_AS(evaluate_predictor([](const TensorF& t) { return t; }, empty,
                                           pre, dir.path()),
                        DataError);
    }
    SUBCASE("report files round-trip through csv recomputation") {
        auto model = build_paper_cnn(CnnVariant::base, {1, 64, {4, 4, 4, 4}, 8, 0.5});
        initialize(model, 3);
        auto report = evaluate(model, index, pre, dir.path());

        const auto json_path = dir.path() / "report.json";
        const auto csv_path = dir.path() / "confusion.csv";
        report.write_json(json_path);
        report.write_confusion_csv(csv_path);

        // recompute the metrics from the written confusion matrix
        std::ifstream csv(csv_path);
        std::string line;
        std::getline(csv, line);  // header
        Confusion parsed = make_confusion(10);
        for (std::size_t r = 0; r < 10; ++r) {
            REQUIRE(std::getline(csv, line));
            std::size_t pos = line.find(',');
            for (std::size_t c = 0; c < 10; ++c) {
                const std::size_t next = line.find(',', pos + 1);
                parsed[r][c] = std::stoull(line.substr(pos + 1, next - pos - 1));
                pos = next;
            }
        }
        CHECK(overall_accuracy(parsed) == report.overall);
        CHECK(macro_f1(parsed) == report.macro_f1);
        const auto recall = per_class_accuracy(parsed);
        for (std::size_t k = 0; k < 10; ++k) CHECK(recall[k] == report.per_class[k]);

        const auto json_text = report.to_json_string();
        CHECK(json_text.find("overall_accuracy") != std::string::npos);
        CHECK(std::filesystem::file_size(json_path) > 0);
    }
}

TEST_CASE("ensemble prediction") {
    std::vector<double> pa{0.70, 0.10, 0.05, 0.02, 0.02, 0.02, 0.02, 0.02, 0.03, 0.02};
    std::vector<double> pb{0.05, 0.60, 0.20, 0.03, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02};
    auto model_a = fixed_output_model(pa);
    auto model_b = fixed_output_model(pb);
    TensorF input({1, 2, 2});

    SUBCASE("one member is the identity") {
        auto single = model_a.forward(input);
        auto combined = ensemble_predict({&model_a}, {}, input);
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(std::abs(combined[i] - single[i]) <= 1e-7);
        }
    }
    SUBCASE("k copies with uniform weights equal the single model") {
        auto single = model_a.forward(input);
        auto combined = ensemble_predict({&model_a, &model_a, &model_a}, {}, input);
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(std::abs(combined[i] - single[i]) <= 1e-7);
        }
    }
    SUBCASE("weighted two-member case matches the hand computation") {
        auto out_a = model_a.forward(input);
        auto out_b = model_b.forward(input);
        auto combined = ensemble_predict({&model_a, &model_b}, {1.0, 3.0}, input);
        double sum = 0.0;
        for (std::size_t i = 0; i < 10; ++i) {
            const double expected = (1.0 * out_a[i] + 3.0 * out_b[i]) / 4.0;
            CHECK(std::abs(combined[i] - expected) <= 1e-7);
            sum += combined[i];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
    SUBCASE("bad member lists are rejected") {
        CHECK_THROWS_AS(ensemble_predict({}, {}, input), ConfigError);
        CHECK_THROWS_AS(ensemble_predict({&model_a, &model_b}, {1.0}, input),
                        ConfigError);
        CHECK_THROWS_AS(ensemble_predict({&model_a}, {-1.0}, input), ConfigError);
        CHECK_THROWS_AS(ensemble_predict({&model_a, &model_b}, {0.0, 0.0}, input),
                        ConfigError);
    }
}

TEST_CASE("training loop") {
    testutil::TempDir dir;
    auto corpus = synth_dataset(dir.path(), 3, 3, 21);  // 90 images
    auto split = split_by_driver(corpus, 0.34, 5);
    Preprocessor pre{1, 32, 32};
    CnnConfig small;
    small.input_size = 32;
    small.conv_filters = {4, 8, 8, 8};
    small.hidden_units = 16;
    AugmentPolicy no_augment;
    no_augment.enabled = false;

    SUBCASE("learning rate 0 is a parameter no-op") {
        auto model = build_paper_cnn(CnnVariant::base, small);
        initialize(model, 7);
        const auto snapshot = model.parameters;
        TrainConfig config{2, 10, 0.0, OptimizerKind::sgd, 1};
        train(model, split.train, split.val, config, no_augment, pre, dir.path());
        for (const auto& [name, tensor] : snapshot) {
            const auto& current = model.parameters.at(name);
            for (std::size_t i = 0; i < tensor.size(); ++i) {
                CHECK(current[i] == tensor[i]);
            }
        }
    }
    SUBCASE("same seed reproduces the history bit for bit") {
        TrainConfig config{2, 10, 0.001, OptimizerKind::adam, 42};
        AugmentPolicy augmented;  // exercise the augmentation rng path too

        auto run = [&] {
            auto model = build_paper_cnn(CnnVariant::base, small);
            initialize(model, 7);
            return train(model, split.train, split.val, config, augmented, pre,
                         dir.path());
        };
        auto h1 = run();
        auto h2 = run();
        REQUIRE(h1.epochs.size() == h2.epochs.size());
        for (std::size_t e = 0; e < h1.epochs.size(); ++e) {
            CHECK(h1.epochs[e].train_loss == h2.epochs[e].train_loss);
            CHECK(h1.epochs[e].train_accuracy == h2.epochs[e].train_accuracy);
            CHECK(h1.epochs[e].val_accuracy == h2.epochs[e].val_accuracy);
        }
    }
    SUBCASE("overlapping drivers are refused unless explicitly allowed") {
        auto model = build_paper_cnn(CnnVariant::base, small);
        initialize(model, 1);
        TrainConfig config{1, 10, 0.001, OptimizerKind::sgd, 1};
        CHECK_THROWS_AS(train(model, split.train, split.train, config, no_augment,
                              pre, dir.path()),
                        DataError);
        TrainOptions allow;
        allow.allow_driver_overlap = true;
        CHECK_NOTHROW(train(model, split.train, split.train, config, no_augment, pre,
                            dir.path(), allow));
    }
    SUBCASE("batch size larger than the split is a config error") {
        auto model = build_paper_cnn(CnnVariant::base, small);
        initialize(model, 7);
        TrainConfig config{1, 10000, 0.001, OptimizerKind::sgd, 1};
        CHECK_THROWS_AS(
            train(model, split.train, split.val, config, no_augment, pre, dir.path()),
            ConfigError);
    }
    SUBCASE("history csv has one row per epoch") {
        auto model = build_paper_cnn(CnnVariant::base, small);
        initialize(model, 7);
        TrainConfig config{3, 10, 0.001, OptimizerKind::adam, 9};
        auto history =
            train(model, split.train, split.val, config, no_augment, pre, dir.path());
        REQUIRE(history.epochs.size() == 3);
        const auto csv_path = dir.path() / "history.csv";
        history.write_csv(csv_path);
        std::ifstream in(csv_path);
        std::string line;
        std::getline(in, line);
        CHECK(line == "epoch,train_loss,train_acc,val_acc");
        int rows = 0;
        while (std::getline(in, line)) {
            if (!line.empty()) ++rows;
        }
        CHECK(rows == 3);
    }
}

TEST_CASE("overfitting a single batch of 40 reaches full training accuracy") {
    testutil::TempDir dir;
    SynthOptions options;
    options.noise_amplitude = 4;
    auto corpus = synth_dataset(dir.path(), 2, 4, 33, options);  // 2 drivers x 40
    auto split = split_by_driver(corpus, 0.5, 1);
    REQUIRE(split.train.size() == 40);

    Preprocessor pre{1, 64, 64};
    CnnConfig small;
    small.input_size = 64;
    small.conv_filters = {8, 16, 16, 32};
    small.hidden_units = 64;
    auto model = build_paper_cnn(CnnVariant::base, small);
    initialize(model, 11);

    TrainConfig config{200, 40, 0.001, OptimizerKind::adam, 3};
    TrainOptions options_train;
    double best_train = 0.0;
    options_train.on_epoch = [&](const EpochStats& stats) {
        best_train = std::max(best_train, stats.train_accuracy);
        return stats.train_accuracy < 1.0;  // stop once the batch is memorized
    };
    train(model, split.train, split.val, config, AugmentPolicy{0, 0, 0, false}, pre,
          dir.path(), options_train);
    CHECK(best_train == 1.0);
}
