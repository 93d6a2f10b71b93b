#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ddcnn/dataset.hpp"
#include "ddcnn/image.hpp"
#include "ddcnn/preprocess.hpp"

namespace ddcnn {

/// Grayscale image with f64 pixels in the native 0..255 scale; averages and
/// differences are kept in floating point so exact laws hold (mean of n
/// copies of X is X, diff(a,b) == -diff(b,a)).
struct FloatImage {
    int height = 0;
    int width = 0;
    std::vector<double> values;  // y * width + x

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Per-pixel arithmetic mean (f64 accumulation) over the class's images,
/// each preprocessed to grayscale at the preprocessor's resolution.
FloatImage average_image(const DatasetIndex& index, const std::string& class_label,
                         const Preprocessor& preprocessing,
                         const std::filesystem::path& dataset_root);

struct DiffImage {
    FloatImage raw;              // signed difference a - b
    ImageBuffer visualization;   // min-max rescaled to 8 bits
};

DiffImage diff_image(const FloatImage& a, const FloatImage& b);

/// Round-to-nearest 8-bit quantization (values clamped to [0,255]).
ImageBuffer quantize_u8(const FloatImage& image);

} // namespace ddcnn
