#include "ddcnn/eda.hpp"

#include <algorithm>
#include <cmath>

#include "ddcnn/errors.hpp"

namespace ddcnn {

FloatImage average_image(const DatasetIndex& index, const std::string& class_label,
                         const Preprocessor& preprocessing,
                         const std::filesystem::path& dataset_root) {
    if (preprocessing.channels != 1) {
        throw ConfigError("average_image expects a grayscale preprocessor");
    }
    FloatImage acc;
    acc.height = preprocessing.height;
    acc.width = preprocessing.width;
    acc.values.assign(static_cast<std::size_t>(acc.height) * acc.width, 0.0);

    std::size_t n = 0;
    for (const auto& row : index.rows) {
        if (row.label != class_label) continue;
        const ImageBuffer image =
            preprocessing.prepare(decode_image(dataset_root / row.image_path));
        for (std::size_t i = 0; i < acc.values.size(); ++i) {
            acc.values[i] += image.pixels[i];
        }
        ++n;
    }
    if (n == 0) {
        throw DataError("class '" + class_label + "' has no images to average");
    }
    for (double& v : acc.values) v /= static_cast<double>(n);
    return acc;
}

DiffImage diff_image(const FloatImage& a, const FloatImage& b) {
    if (a.height != b.height || a.width != b.width) {
        throw ShapeError("diff_image inputs must share dimensions");
    }
    DiffImage diff;
    diff.raw.height = a.height;
    diff.raw.width = a.width;
    diff.raw.values.resize(a.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        diff.raw.values[i] = a.values[i] - b.values[i];
    }

    const auto [lo_it, hi_it] =
        std::minmax_element(diff.raw.values.begin(), diff.raw.values.end());
    const double lo = *lo_it, hi = *hi_it;

    diff.visualization = ImageBuffer{1, a.height, a.width, {}};
    diff.visualization.pixels.resize(diff.raw.values.size());
    if (hi > lo) {
        const double scale = 255.0 / (hi - lo);
        for (std::size_t i = 0; i < diff.raw.values.size(); ++i) {
            diff.visualization.pixels[i] = static_cast<std::uint8_t>(
                std::lround((diff.raw.values[i] - lo) * scale));
        }
    }
    // equal images: raw difference is identically zero and so is the artifact
    return diff;
}

ImageBuffer quantize_u8(const FloatImage& image) {
    ImageBuffer out{1, image.height, image.width, {}};
    out.pixels.resize(image.values.size());
    for (std::size_t i = 0; i < image.values.size(); ++i) {
        out.pixels[i] = static_cast<std::uint8_t>(
            std::clamp(std::lround(image.values[i]), 0l, 255l));
    }
    return out;
}

} // namespace ddcnn
