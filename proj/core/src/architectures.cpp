#include "ddcnn/architectures.hpp"

#include <string>

#include "ddcnn/errors.hpp"

namespace ddcnn {

namespace {

LayerSpec conv(std::string name, int in_ch, int out_ch, int kernel, int stride,
               int padding) {
    LayerSpec layer;
    layer.kind = LayerKind::conv2d;
    layer.name = std::move(name);
    layer.conv = ConvParams{kernel, kernel, in_ch, out_ch, stride, padding};
    return layer;
}

LayerSpec activation() {
    LayerSpec layer;
    layer.kind = LayerKind::relu;
    return layer;
}

LayerSpec pool() {
    LayerSpec layer;
    layer.kind = LayerKind::maxpool;
    return layer;
}

LayerSpec dense(std::string name, std::size_t units) {
    LayerSpec layer;
    layer.kind = LayerKind::dense;
    layer.name = std::move(name);
    layer.units = units;
    return layer;
}

LayerSpec dropout(double rate) {
    LayerSpec layer;
    layer.kind = LayerKind::dropout;
    layer.rate = rate;
    return layer;
}

LayerSpec batchnorm(std::string name) {
    LayerSpec layer;
    layer.kind = LayerKind::batchnorm;
    layer.name = std::move(name);
    return layer;
}

LayerSpec simple(LayerKind kind) {
    LayerSpec layer;
    layer.kind = kind;
    return layer;
}

void freeze_all(std::vector<LayerSpec>& layers) {
    for (auto& layer : layers) {
        layer.trainable = false;
        freeze_all(layer.body);
        freeze_all(layer.shortcut);
    }
}

} // namespace

ModelGraph build_paper_cnn(CnnVariant variant, const CnnConfig& config) {
    if (config.input_size == 0 || config.input_channels == 0) {
        throw ConfigError("cnn input dims must be positive");
    }
    ModelGraph graph;
    graph.name = variant == CnnVariant::base ? "cnn" : "cnn-opt";
    graph.default_init =
        variant == CnnVariant::base ? InitKind::glorot_normal : InitKind::he_normal;
    graph.input_dims = {config.input_channels, config.input_size, config.input_size};

    const int pools = variant == CnnVariant::base ? 4 : 3;
    int in_ch = static_cast<int>(config.input_channels);
    for (int i = 0; i < 4; ++i) {
        const int out_ch = static_cast<int>(config.conv_filters[i]);
        graph.layers.push_back(conv("conv" + std::to_string(i + 1), in_ch, out_ch,
                                    /*kernel=*/3, /*stride=*/1, /*padding=*/1));
        graph.layers.push_back(activation());
        if (i < pools) graph.layers.push_back(pool());
        in_ch = out_ch;
    }
    graph.layers.push_back(simple(LayerKind::flatten));
    graph.layers.push_back(dropout(config.dropout_rate));
    graph.layers.push_back(dense("dense1", config.hidden_units));
    graph.layers.push_back(activation());
    if (variant == CnnVariant::base) {
        graph.layers.push_back(dropout(config.dropout_rate));
    }
    graph.layers.push_back(dense("dense2", kNumClasses));
    graph.layers.push_back(simple(LayerKind::softmax));

    bind_parameters(graph);
    return graph;
}

ModelGraph build_vgg16(VggHead head, const VggConfig& config) {
    if (config.input_size == 0 || config.input_size % 32 != 0) {
        throw ConfigError("vgg16 input resolution must be a positive multiple of 32, got " +
                          std::to_string(config.input_size));
    }
    ModelGraph graph;
    graph.name = head == VggHead::linear_probe ? "vgg16" : "vgg16-opt";
    graph.default_init = InitKind::glorot_normal;
    graph.input_dims = {3, config.input_size, config.input_size};

    // configuration D: 2-2-3-3-3 convs of 64/128/256/512/512 channels
    const int block_convs[5] = {2, 2, 3, 3, 3};
    const int block_width[5] = {64, 128, 256, 512, 512};
    int in_ch = 3;
    for (int b = 0; b < 5; ++b) {
        for (int c = 0; c < block_convs[b]; ++c) {
            const std::string name =
                "b" + std::to_string(b + 1) + "c" + std::to_string(c + 1);
            graph.layers.push_back(conv(name, in_ch, block_width[b], 3, 1, 1));
            graph.layers.push_back(activation());
            in_ch = block_width[b];
        }
        graph.layers.push_back(pool());
    }
    freeze_all(graph.layers);  // pretrained backbone is never fine-tuned here

    if (head == VggHead::linear_probe) {
        graph.layers.push_back(simple(LayerKind::gap));
        graph.layers.push_back(dense("head.fc", kNumClasses));
    } else {
        graph.layers.push_back(
            simple(config.gap_head ? LayerKind::gap : LayerKind::flatten));
        graph.layers.push_back(dense("head.fc1", config.hidden_units));
        graph.layers.push_back(activation());
        graph.layers.push_back(dropout(config.dropout_rate));
        graph.layers.push_back(dense("head.fc2", kNumClasses));
    }
    graph.layers.push_back(simple(LayerKind::softmax));

    bind_parameters(graph);
    return graph;
}

ModelGraph build_resnet50(const ResNetConfig& config) {
    if (config.input_size < 32) {
        throw ConfigError("resnet50 input resolution must be >= 32, got " +
                          std::to_string(config.input_size));
    }
    ModelGraph graph;
    graph.name = "resnet50";
    graph.default_init = InitKind::glorot_normal;
    graph.input_dims = {3, config.input_size, config.input_size};

    graph.layers.push_back(conv("stem.conv", 3, 64, 7, 2, 3));
    graph.layers.push_back(batchnorm("stem.bn"));
    graph.layers.push_back(activation());
    graph.layers.push_back(pool());

    const int stage_width[4] = {64, 128, 256, 512};
    const int stage_blocks[4] = {3, 4, 6, 3};
    const int expansion = 4;
    int in_ch = 64;
    for (int s = 0; s < 4; ++s) {
        const int width = stage_width[s];
        for (int b = 0; b < stage_blocks[s]; ++b) {
            const int stride = (s > 0 && b == 0) ? 2 : 1;
            const std::string prefix =
                "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
            LayerSpec block;
            block.kind = LayerKind::residual;
            block.name = prefix;
            block.body.push_back(conv(prefix + ".conv1", in_ch, width, 1, 1, 0));
            block.body.push_back(batchnorm(prefix + ".bn1"));
            block.body.push_back(activation());
            block.body.push_back(conv(prefix + ".conv2", width, width, 3, stride, 1));
            block.body.push_back(batchnorm(prefix + ".bn2"));
            block.body.push_back(activation());
            block.body.push_back(
                conv(prefix + ".conv3", width, width * expansion, 1, 1, 0));
            block.body.push_back(batchnorm(prefix + ".bn3"));
            if (b == 0) {
                block.shortcut.push_back(conv(prefix + ".downsample.conv", in_ch,
                                              width * expansion, 1, stride, 0));
                block.shortcut.push_back(batchnorm(prefix + ".downsample.bn"));
            }
            graph.layers.push_back(std::move(block));
            in_ch = width * expansion;
        }
    }
    freeze_all(graph.layers);

    graph.layers.push_back(simple(LayerKind::gap));
    graph.layers.push_back(dense("head.fc", kNumClasses));
    graph.layers.push_back(simple(LayerKind::softmax));

    bind_parameters(graph);
    return graph;
}

} // namespace ddcnn
