#include "run_config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ddcnn/errors.hpp"

namespace ddcnn::cli {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "off" || value == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& value, const std::string& key) {
    T out{};
    std::istringstream ss(value);
    ss >> out;
    if (ss.fail() || !ss.eof()) {
        throw ConfigError("config key '" + key + "': bad numeric value '" + value + "'");
    }
    return out;
}

std::array<std::size_t, 4> parse_filters(const std::string& text) {
    std::array<std::size_t, 4> filters{};
    std::istringstream ss(text);
    std::string field;
    std::size_t i = 0;
    while (std::getline(ss, field, ',')) {
        if (i >= 4) break;
        filters[i++] = parse_number<std::size_t>(trim(field), "cnn_filters");
    }
    if (i != 4) {
        throw ConfigError("cnn_filters must list exactly 4 widths, got '" + text + "'");
    }
    for (std::size_t f : filters) {
        if (f == 0) throw ConfigError("cnn_filters widths must be positive");
    }
    return filters;
}

struct ModelDefaults {
    int input_size;
    int epochs;
    int batch_size;
};

ModelDefaults model_defaults(const std::string& model) {
    if (model == "cnn" || model == "cnn-opt") return {64, 25, 40};
    if (model == "vgg16") return {224, 400, 16};
    if (model == "vgg16-opt") return {224, 75, 16};
    if (model == "resnet50") return {224, 400, 16};
    throw ConfigError("unknown model '" + model +
                      "' (expected cnn, cnn-opt, vgg16, vgg16-opt, or resnet50)");
}

} // namespace

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");

    const std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"dataset_root", [&](const std::string& v) { config.dataset_root = v; }},
        {"manifest", [&](const std::string& v) { config.manifest = v; }},
        {"output_dir", [&](const std::string& v) { config.output_dir = v; }},
        {"model", [&](const std::string& v) { config.model = v; }},
        {"input_size",
         [&](const std::string& v) { config.input_size = parse_number<int>(v, "input_size"); }},
        {"epochs",
         [&](const std::string& v) { config.epochs = parse_number<int>(v, "epochs"); }},
        {"batch_size",
         [&](const std::string& v) { config.batch_size = parse_number<int>(v, "batch_size"); }},
        {"learning_rate",
         [&](const std::string& v) {
             config.learning_rate = parse_number<double>(v, "learning_rate");
         }},
        {"optimizer", [&](const std::string& v) { config.optimizer = v; }},
        {"seed",
         [&](const std::string& v) { config.seed = parse_number<std::uint64_t>(v, "seed"); }},
        {"val_fraction",
         [&](const std::string& v) {
             config.val_fraction = parse_number<double>(v, "val_fraction");
         }},
        {"augment", [&](const std::string& v) { config.augment = parse_bool(v, "augment"); }},
        {"augment_rotation_deg",
         [&](const std::string& v) {
             config.augment_rotation_deg = parse_number<double>(v, "augment_rotation_deg");
         }},
        {"augment_shift_frac",
         [&](const std::string& v) {
             config.augment_shift_frac = parse_number<double>(v, "augment_shift_frac");
         }},
        {"augment_brightness_frac",
         [&](const std::string& v) {
             config.augment_brightness_frac =
                 parse_number<double>(v, "augment_brightness_frac");
         }},
        {"cnn_filters", [&](const std::string& v) { config.cnn_filters = v; }},
        {"hidden_units",
         [&](const std::string& v) {
             config.hidden_units = parse_number<int>(v, "hidden_units");
         }},
        {"vgg_head_pool", [&](const std::string& v) { config.vgg_head_pool = v; }},
        {"latency_budget_seconds",
         [&](const std::string& v) {
             config.latency_budget_seconds =
                 parse_number<double>(v, "latency_budget_seconds");
         }},
        {"leaky_split",
         [&](const std::string& v) { config.leaky_split = parse_bool(v, "leaky_split"); }},
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config '" + path.string() + "' line " +
                              std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError("config '" + path.string() + "' line " +
                              std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        it->second(value);
    }
}

void apply_overrides(RunConfig& config, const Overrides& o) {
    if (o.dataset_root) config.dataset_root = *o.dataset_root;
    if (o.manifest) config.manifest = *o.manifest;
    if (o.output_dir) config.output_dir = *o.output_dir;
    if (o.model) config.model = *o.model;
    if (o.optimizer) config.optimizer = *o.optimizer;
    if (o.cnn_filters) config.cnn_filters = *o.cnn_filters;
    if (o.vgg_head_pool) config.vgg_head_pool = *o.vgg_head_pool;
    if (o.input_size) config.input_size = *o.input_size;
    if (o.epochs) config.epochs = *o.epochs;
    if (o.batch_size) config.batch_size = *o.batch_size;
    if (o.hidden_units) config.hidden_units = *o.hidden_units;
    if (o.learning_rate) config.learning_rate = *o.learning_rate;
    if (o.val_fraction) config.val_fraction = *o.val_fraction;
    if (o.augment_rotation_deg) config.augment_rotation_deg = *o.augment_rotation_deg;
    if (o.augment_shift_frac) config.augment_shift_frac = *o.augment_shift_frac;
    if (o.augment_brightness_frac) {
        config.augment_brightness_frac = *o.augment_brightness_frac;
    }
    if (o.latency_budget_seconds) {
        config.latency_budget_seconds = *o.latency_budget_seconds;
    }
    if (o.seed) config.seed = *o.seed;
    if (o.augment) config.augment = *o.augment;
    if (o.leaky_split) config.leaky_split = *o.leaky_split;
}

void validate(const RunConfig& config) {
    model_defaults(config.model);  // throws on unknown models
    if (config.optimizer != "sgd" && config.optimizer != "adam") {
        throw ConfigError("optimizer must be sgd or adam, got '" + config.optimizer + "'");
    }
    if (config.vgg_head_pool != "gap" && config.vgg_head_pool != "flatten") {
        throw ConfigError("vgg_head_pool must be gap or flatten");
    }
    if (config.learning_rate <= 0.0) {
        throw ConfigError("learning_rate must be positive");
    }
    if (config.val_fraction <= 0.0 || config.val_fraction >= 1.0) {
        throw ConfigError("val_fraction must lie in (0,1)");
    }
    if (config.input_size < 0 || config.epochs < 0 || config.batch_size < 0 ||
        config.hidden_units < 1) {
        throw ConfigError("sizes, epochs and batch_size must be positive (0 keeps the "
                          "model default)");
    }
    if (config.augment_rotation_deg < 0.0 || config.augment_shift_frac < 0.0 ||
        config.augment_brightness_frac < 0.0) {
        throw ConfigError("augmentation ranges must be non-negative");
    }
    if (config.latency_budget_seconds < 0.0) {
        throw ConfigError("latency_budget_seconds must be non-negative");
    }
    parse_filters(config.cnn_filters);
}

std::string resolved_text(const RunConfig& config) {
    const auto defaults = model_defaults(config.model);
    std::ostringstream out;
    out << "dataset_root = " << config.dataset_root << "\n";
    out << "manifest = " << config.manifest << "\n";
    out << "output_dir = " << config.output_dir << "\n";
    out << "model = " << config.model << "\n";
    out << "input_size = "
        << (config.input_size > 0 ? config.input_size : defaults.input_size) << "\n";
    out << "epochs = " << (config.epochs > 0 ? config.epochs : defaults.epochs) << "\n";
    out << "batch_size = "
        << (config.batch_size > 0 ? config.batch_size : defaults.batch_size) << "\n";
    out << "learning_rate = " << config.learning_rate << "\n";
    out << "optimizer = " << config.optimizer << "\n";
    out << "seed = " << config.seed << "\n";
    out << "val_fraction = " << config.val_fraction << "\n";
    out << "augment = " << (config.augment ? "true" : "false") << "\n";
    out << "augment_rotation_deg = " << config.augment_rotation_deg << "\n";
    out << "augment_shift_frac = " << config.augment_shift_frac << "\n";
    out << "augment_brightness_frac = " << config.augment_brightness_frac << "\n";
    out << "cnn_filters = " << config.cnn_filters << "\n";
    out << "hidden_units = " << config.hidden_units << "\n";
    out << "vgg_head_pool = " << config.vgg_head_pool << "\n";
    out << "latency_budget_seconds = " << config.latency_budget_seconds << "\n";
    out << "leaky_split = " << (config.leaky_split ? "true" : "false") << "\n";
    return out.str();
}

ResolvedModel build_model(const RunConfig& config) {
    validate(config);
    const auto defaults = model_defaults(config.model);
    const int input_size =
        config.input_size > 0 ? config.input_size : defaults.input_size;

    ResolvedModel resolved;
    resolved.epochs = config.epochs > 0 ? config.epochs : defaults.epochs;
    resolved.batch_size = config.batch_size > 0 ? config.batch_size : defaults.batch_size;

    if (config.model == "cnn" || config.model == "cnn-opt") {
        CnnConfig cnn;
        cnn.input_size = static_cast<std::size_t>(input_size);
        cnn.conv_filters = parse_filters(config.cnn_filters);
        cnn.hidden_units = static_cast<std::size_t>(config.hidden_units);
        resolved.graph = build_paper_cnn(
            config.model == "cnn" ? CnnVariant::base : CnnVariant::optimized, cnn);
        resolved.preprocessing = Preprocessor{1, input_size, input_size};
    } else if (config.model == "vgg16" || config.model == "vgg16-opt") {
        VggConfig vgg;
        vgg.input_size = static_cast<std::size_t>(input_size);
        vgg.hidden_units = static_cast<std::size_t>(config.hidden_units);
        vgg.gap_head = config.vgg_head_pool == "gap";
        resolved.graph = build_vgg16(config.model == "vgg16" ? VggHead::linear_probe
                                                             : VggHead::optimized_head,
                                     vgg);
        resolved.preprocessing = Preprocessor{3, input_size, input_size};
    } else {
        ResNetConfig resnet;
        resnet.input_size = static_cast<std::size_t>(input_size);
        resolved.graph = build_resnet50(resnet);
        resolved.preprocessing = Preprocessor{3, input_size, input_size};
    }
    return resolved;
}

TrainConfig train_config(const RunConfig& config, const ResolvedModel& resolved) {
    TrainConfig tc;
    tc.epochs = resolved.epochs;
    tc.batch_size = resolved.batch_size;
    tc.learning_rate = config.learning_rate;
    tc.optimizer = config.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
    tc.seed = config.seed;
    return tc;
}

AugmentPolicy augment_policy(const RunConfig& config) {
    AugmentPolicy policy;
    policy.enabled = config.augment;
    policy.rotation_deg_max = config.augment_rotation_deg;
    policy.shift_frac_max = config.augment_shift_frac;
    policy.brightness_frac_max = config.augment_brightness_frac;
    return policy;
}

} // namespace ddcnn::cli
