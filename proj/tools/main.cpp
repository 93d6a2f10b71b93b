#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ddcnn/dataset.hpp"
#include "ddcnn/eda.hpp"
#include "ddcnn/ensemble.hpp"
#include "ddcnn/errors.hpp"
#include "ddcnn/initializers.hpp"
#include "ddcnn/latency.hpp"
#include "ddcnn/metrics.hpp"
#include "ddcnn/synth.hpp"
#include "ddcnn/weights_io.hpp"
#include "run_config.hpp"

namespace {

using namespace ddcnn;
using cli::RunConfig;

// exit codes: 0 success, 1 internal error, 2 input/data error,
// 3 config/compatibility error, 4 benchmark budget violation
constexpr int kExitInternal = 1;
constexpr int kExitData = 2;
constexpr int kExitConfig = 3;
constexpr int kExitBudget = 4;

struct CommonState {
    std::string config_path;
    cli::Overrides overrides;
};

void add_common(CLI::App* cmd, CommonState& state) {
    cmd->add_option("--config", state.config_path, "run configuration file (key = value)");
    cmd->add_option("--dataset-root", state.overrides.dataset_root,
                    "directory holding <classname>/<img> images");
    cmd->add_option("--manifest", state.overrides.manifest,
                    "manifest csv (subject,classname,img); defaults to "
                    "<dataset-root>/manifest.csv");
    cmd->add_option("--output-dir", state.overrides.output_dir, "where outputs go");
    cmd->add_option("--model", state.overrides.model)
        ->check(CLI::IsMember({"cnn", "cnn-opt", "vgg16", "vgg16-opt", "resnet50"}));
    cmd->add_option("--seed", state.overrides.seed, "master seed for every random choice");
    cmd->add_option("--input-size", state.overrides.input_size);
    cmd->add_option("--epochs", state.overrides.epochs);
    cmd->add_option("--batch-size", state.overrides.batch_size);
    cmd->add_option("--learning-rate", state.overrides.learning_rate);
    cmd->add_option("--optimizer", state.overrides.optimizer)
        ->check(CLI::IsMember({"sgd", "adam"}));
    cmd->add_option("--val-fraction", state.overrides.val_fraction);
    cmd->add_option("--cnn-filters", state.overrides.cnn_filters,
                    "four comma-separated conv widths");
    cmd->add_option("--hidden-units", state.overrides.hidden_units);
    cmd->add_option("--vgg-head-pool", state.overrides.vgg_head_pool)
        ->check(CLI::IsMember({"gap", "flatten"}));
    cmd->add_flag_callback("--augment",
                           [&state] { state.overrides.augment = true; });
    cmd->add_flag_callback("--no-augment",
                           [&state] { state.overrides.augment = false; });
    cmd->add_flag_callback(
        "--leaky-split", [&state] { state.overrides.leaky_split = true; },
        "split by image instead of by driver (leakage demonstration only)");
}

RunConfig resolve(const CommonState& state) {
    RunConfig config;
    if (!state.config_path.empty()) {
        cli::apply_config_file(config, state.config_path);
    }
    cli::apply_overrides(config, state.overrides);
    cli::validate(config);
    return config;
}

std::filesystem::path manifest_path(const RunConfig& config) {
    if (!config.manifest.empty()) return config.manifest;
    if (!config.dataset_root.empty()) {
        return std::filesystem::path(config.dataset_root) / "manifest.csv";
    }
    throw ConfigError("either manifest or dataset_root must be set");
}

std::filesystem::path prepare_output_dir(const RunConfig& config) {
    std::filesystem::path dir(config.output_dir);
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "resolved_config.cfg", std::ios::trunc);
    if (!out) throw IoError("cannot write resolved config in '" + dir.string() + "'");
    out << cli::resolved_text(config);
    return dir;
}

DatasetIndex eval_index(const RunConfig& config, const std::string& labels_path,
                        const std::string& split_choice) {
    if (!labels_path.empty()) return load_labels(labels_path);
    auto index = load_manifest(manifest_path(config));
    if (split_choice == "all") return index;
    const auto split =
        config.leaky_split
            ? split_random_by_image(index, config.val_fraction, config.seed)
            : split_by_driver(index, config.val_fraction, config.seed);
    return split_choice == "train" ? split.train : split.val;
}

void print_report_summary(const EvalReport& report) {
    std::printf("samples %llu  overall_accuracy %.6f  macro_f1 %.6f\n",
                static_cast<unsigned long long>(report.sample_count), report.overall,
                report.macro_f1);
    for (std::size_t k = 0; k < report.per_class.size(); ++k) {
        std::printf("  c%zu accuracy %.6f\n", k, report.per_class[k]);
    }
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
    report.write_json(dir / "report.json");
    report.write_confusion_csv(dir / "confusion.csv");
}

int cmd_eda(const RunConfig& config, const std::vector<std::string>& pairs) {
    const auto dir = prepare_output_dir(config);
    const auto index = load_manifest(manifest_path(config));
    const std::filesystem::path root(config.dataset_root);

    {
        std::ofstream counts(dir / "class_counts.csv", std::ios::trunc);
        if (!counts) throw IoError("cannot write class_counts.csv");
        counts << "classname,count\n";
        for (const auto& [label, count] : index.class_counts()) {
            counts << label << "," << count << "\n";
        }
    }

    const int size = config.input_size > 0 ? config.input_size : 64;
    const Preprocessor pre{1, size, size};
    const auto counts = index.class_counts();
    std::map<std::string, FloatImage> averages;
    for (const auto& [label, count] : counts) {
        (void)count;
        averages.emplace(label, average_image(index, label, pre, root));
        encode_image(quantize_u8(averages.at(label)), dir / ("avg_" + label + ".pgm"));
    }

    std::vector<std::pair<std::string, std::string>> selected;
    if (pairs.empty()) {
        for (auto a = counts.begin(); a != counts.end(); ++a) {
            for (auto b = std::next(a); b != counts.end(); ++b) {
                selected.emplace_back(a->first, b->first);
            }
        }
    } else {
        for (const auto& pair : pairs) {
            const auto comma = pair.find(',');
            if (comma == std::string::npos) {
                throw ConfigError("--pair expects 'cA,cB', got '" + pair + "'");
            }
            selected.emplace_back(pair.substr(0, comma), pair.substr(comma + 1));
        }
    }
    for (const auto& [a, b] : selected) {
        if (!averages.count(a)) averages.emplace(a, average_image(index, a, pre, root));
        if (!averages.count(b)) averages.emplace(b, average_image(index, b, pre, root));
        const auto diff = diff_image(averages.at(a), averages.at(b));
        encode_image(diff.visualization, dir / ("diff_" + a + "_" + b + ".pgm"));
    }

    std::printf("eda: %zu classes, %zu images, artifacts in %s\n", counts.size(),
                index.size(), dir.string().c_str());
    return 0;
}

int cmd_train(const RunConfig& config) {
    const auto dir = prepare_output_dir(config);
    auto resolved = cli::build_model(config);
    initialize(resolved.graph, config.seed);

    std::printf("model %s: trainable parameters %zu (total %zu)\n",
                resolved.graph.name.c_str(), count_parameters(resolved.graph, true),
                count_parameters(resolved.graph, false));

    const auto index = load_manifest(manifest_path(config));
    const auto split =
        config.leaky_split
            ? split_random_by_image(index, config.val_fraction, config.seed)
            : split_by_driver(index, config.val_fraction, config.seed);
    std::printf("split: %zu train / %zu val images (%s)\n", split.train.size(),
                split.val.size(),
                config.leaky_split ? "image-level, leaky" : "driver-disjoint");

    TrainOptions options;
    options.allow_driver_overlap = config.leaky_split;
    options.on_epoch = [&](const EpochStats& stats) {
        std::printf("epoch %d/%d  loss %.4f  train_acc %.4f  val_acc %.4f\n",
                    stats.epoch, resolved.epochs, stats.train_loss,
                    stats.train_accuracy, stats.val_accuracy);
        std::fflush(stdout);
        return true;
    };

    auto history = train(resolved.graph, split.train, split.val,
                         cli::train_config(config, resolved), cli::augment_policy(config),
                         resolved.preprocessing, config.dataset_root, options);

    const auto weights_path = dir / (config.model + ".ddwt");
    save_weights(resolved.graph, weights_path);
    history.write_csv(dir / "history.csv");
    std::printf("weights: %s\nhistory: %s\n", weights_path.string().c_str(),
                (dir / "history.csv").string().c_str());
    return 0;
}

int cmd_evaluate(const RunConfig& config, const std::string& weights,
                 const std::string& labels, const std::string& split_choice) {
    const auto dir = prepare_output_dir(config);
    auto resolved = cli::build_model(config);
    load_weights(resolved.graph, weights);

    const auto index = eval_index(config, labels, split_choice);
    const auto report =
        evaluate(resolved.graph, index, resolved.preprocessing, config.dataset_root);
    write_report(report, dir);
    print_report_summary(report);
    return 0;
}

int cmd_predict(const RunConfig& config, const std::string& weights,
                const std::string& image) {
    auto resolved = cli::build_model(config);
    load_weights(resolved.graph, weights);

    const TensorF input = resolved.preprocessing.load(image);
    const TensorF probs = resolved.graph.forward(input);
    const std::size_t predicted = argmax_class({probs.data(), probs.size()});

    std::printf("%s %.6f\n", kClassNames[predicted],
                static_cast<double>(probs[predicted]));
    nlohmann::json vector = nlohmann::json::array();
    for (std::size_t k = 0; k < probs.size(); ++k) {
        vector.push_back(static_cast<double>(probs[k]));
    }
    std::printf("%s\n", vector.dump().c_str());
    return 0;
}

int cmd_benchmark(const RunConfig& config, const std::string& weights,
                  const std::string& image, int warmup, int iterations) {
    auto resolved = cli::build_model(config);
    load_weights(resolved.graph, weights);

    const auto report =
        benchmark_latency(resolved.graph, image, resolved.preprocessing, warmup,
                          iterations, config.latency_budget_seconds);
    std::printf("latency mean %.6f s, p95 %.6f s, max %.6f s over %d iterations "
                "(budget %.3f s): %s\n",
                report.stats.mean_s, report.stats.p95_s, report.stats.max_s,
                report.iterations, report.budget_s,
                report.within_budget ? "PASS" : "FAIL");
    return report.within_budget ? 0 : kExitBudget;
}

int cmd_ensemble(const RunConfig& config, const std::vector<std::string>& members,
                 const std::vector<double>& member_weights, const std::string& labels,
                 const std::string& split_choice) {
    if (members.empty()) throw ConfigError("ensemble needs at least one --member");
    const auto dir = prepare_output_dir(config);

    std::vector<cli::ResolvedModel> loaded;
    loaded.reserve(members.size());
    for (const auto& member : members) {
        const auto eq = member.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--member expects '<model>=<weights-file>', got '" +
                              member + "'");
        }
        RunConfig member_config = config;
        member_config.model = member.substr(0, eq);
        auto resolved = cli::build_model(member_config);
        load_weights(resolved.graph, member.substr(eq + 1));
        loaded.push_back(std::move(resolved));
    }
    for (const auto& member : loaded) {
        if (member.preprocessing.channels != loaded.front().preprocessing.channels ||
            member.preprocessing.height != loaded.front().preprocessing.height) {
            throw ConfigError("ensemble members must share an input contract; give "
                              "them a common --input-size");
        }
    }

    std::vector<const ModelGraph*> models;
    for (const auto& member : loaded) models.push_back(&member.graph);

    const auto index = eval_index(config, labels, split_choice);
    const PredictFn predictor = [&](const TensorF& input) {
        return ensemble_predict(models, member_weights, input);
    };
    const auto report = evaluate_predictor(predictor, index,
                                           loaded.front().preprocessing,
                                           config.dataset_root);
    write_report(report, dir);
    print_report_summary(report);
    return 0;
}

int cmd_synth(const std::string& out, int drivers, int images_per_class,
              std::uint64_t seed, int image_size, int class_signal, int noise,
              bool leak_textures) {
    SynthOptions options;
    options.image_size = image_size;
    options.class_signal = class_signal;
    options.noise_amplitude = noise;
    options.driver_cell_textures = leak_textures;
    const auto index = synth_dataset(out, drivers, images_per_class, seed, options);
    std::printf("synthetic corpus: %zu images under %s (manifest.csv included)\n",
                index.size(), out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distracted-driver classification pipeline"};
    app.require_subcommand(1);
    int exit_code = 0;

    CommonState eda_state;
    std::vector<std::string> eda_pairs;
    auto* eda = app.add_subcommand("eda", "class counts, average and difference images");
    add_common(eda, eda_state);
    eda->add_option("--pair", eda_pairs, "restrict difference images to 'cA,cB'");
    eda->callback([&] { exit_code = cmd_eda(resolve(eda_state), eda_pairs); });

    CommonState train_state;
    auto* train_cmd = app.add_subcommand("train", "train a model variant");
    add_common(train_cmd, train_state);
    train_cmd->callback([&] { exit_code = cmd_train(resolve(train_state)); });

    CommonState eval_state;
    std::string eval_weights, eval_labels, eval_split = "val";
    auto* eval_cmd = app.add_subcommand("evaluate", "confusion matrix, accuracy, macro F1");
    add_common(eval_cmd, eval_state);
    eval_cmd->add_option("--weights", eval_weights)->required();
    eval_cmd->add_option("--labels", eval_labels,
                         "production label csv (img,classname); replaces the manifest split");
    eval_cmd->add_option("--split", eval_split)->check(CLI::IsMember({"val", "train", "all"}));
    eval_cmd->callback([&] {
        exit_code = cmd_evaluate(resolve(eval_state), eval_weights, eval_labels, eval_split);
    });

    CommonState predict_state;
    std::string predict_weights, predict_image;
    auto* predict_cmd = app.add_subcommand("predict", "classify a single image");
    add_common(predict_cmd, predict_state);
    predict_cmd->add_option("--weights", predict_weights)->required();
    predict_cmd->add_option("--image", predict_image)->required();
    predict_cmd->callback([&] {
        exit_code = cmd_predict(resolve(predict_state), predict_weights, predict_image);
    });

    CommonState bench_state;
    std::string bench_weights, bench_image;
    int bench_warmup = 10, bench_iterations = 100;
    auto* bench_cmd = app.add_subcommand(
        "benchmark", "single-image latency; exits 4 if the mean misses the budget");
    add_common(bench_cmd, bench_state);
    bench_cmd->add_option("--weights", bench_weights)->required();
    bench_cmd->add_option("--image", bench_image)->required();
    bench_cmd->add_option("--warmup", bench_warmup);
    bench_cmd->add_option("--iterations", bench_iterations);
    bench_cmd->add_option("--budget", bench_state.overrides.latency_budget_seconds,
                          "seconds per image");
    bench_cmd->callback([&] {
        exit_code = cmd_benchmark(resolve(bench_state), bench_weights, bench_image,
                                  bench_warmup, bench_iterations);
    });

    CommonState ensemble_state;
    std::vector<std::string> members;
    std::vector<double> member_weights;
    std::string ensemble_labels, ensemble_split = "val";
    auto* ensemble_cmd =
        app.add_subcommand("ensemble", "evaluate a softmax-averaged ensemble");
    add_common(ensemble_cmd, ensemble_state);
    ensemble_cmd->add_option("--member", members, "'<model>=<weights-file>', repeatable")
        ->required();
    ensemble_cmd->add_option("--member-weight", member_weights,
                             "per-member weight (default uniform)");
    ensemble_cmd->add_option("--labels", ensemble_labels);
    ensemble_cmd->add_option("--split", ensemble_split)
        ->check(CLI::IsMember({"val", "train", "all"}));
    ensemble_cmd->callback([&] {
        exit_code = cmd_ensemble(resolve(ensemble_state), members, member_weights,
                                 ensemble_labels, ensemble_split);
    });

    std::string synth_out;
    int synth_drivers = 10, synth_images = 30, synth_size = 64, synth_signal = 120,
        synth_noise = 12;
    std::uint64_t synth_seed = 0;
    bool synth_leak = false;
    auto* synth_cmd =
        app.add_subcommand("synth", "generate the synthetic test corpus with manifest");
    synth_cmd->add_option("--out", synth_out)->required();
    synth_cmd->add_option("--drivers", synth_drivers);
    synth_cmd->add_option("--images-per-class", synth_images,
                          "images per (driver, class) pair");
    synth_cmd->add_option("--seed", synth_seed);
    synth_cmd->add_option("--image-size", synth_size);
    synth_cmd->add_option("--class-signal", synth_signal);
    synth_cmd->add_option("--noise", synth_noise);
    synth_cmd->add_flag("--leak-textures", synth_leak,
                        "strong per-(driver,class) backgrounds for the leakage demo");
    synth_cmd->callback([&] {
        exit_code = cmd_synth(synth_out, synth_drivers, synth_images, synth_seed,
                              synth_size, synth_signal, synth_noise, synth_leak);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const MismatchError& e) {
        std::fprintf(stderr, "compatibility error: %s\n", e.what());
        return kExitConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitData;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInternal;
    }
    return exit_code;
}
