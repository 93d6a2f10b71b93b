#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ddcnn/tensor.hpp"

namespace ddcnn {

/// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
struct ImageBuffer {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;  // (y * width + x) * channels + c

    std::uint8_t at(int y, int x, int c = 0) const {
        return pixels[static_cast<std::size_t>(y * width + x) * channels + c];
    }
    std::uint8_t& at(int y, int x, int c = 0) {
        return pixels[static_cast<std::size_t>(y * width + x) * channels + c];
    }
    std::size_t sample_count() const {
        return static_cast<std::size_t>(channels) * height * width;
    }
};

/// Decodes JPEG, PNG, or binary PGM/PPM (format sniffed from content).
/// PGM/PPM decoding is bit-exact and is the golden-test path.
ImageBuffer decode_image(const std::filesystem::path& path);

/// Writes PGM (1 channel) or PPM (3 channels).
void encode_image(const ImageBuffer& image, const std::filesystem::path& path);

/// ITU-R BT.601 luma: round(0.299 R + 0.587 G + 0.114 B).
ImageBuffer to_grayscale(const ImageBuffer& rgb);

/// Bilinear resize with half-pixel-centered sampling: the source coordinate
/// of output pixel x is (x + 0.5) * in/out - 0.5, clamped to the image.
ImageBuffer resize_bilinear(const ImageBuffer& image, int out_h, int out_w);

/// value/255 in channel-major [C,H,W] layout: (c,y,x) -> c*H*W + y*W + x.
TensorF normalize(const ImageBuffer& image);

// internal decoders, dispatched by decode_image
ImageBuffer decode_pnm(const std::filesystem::path& path);
ImageBuffer decode_jpeg(const std::filesystem::path& path);
ImageBuffer decode_png(const std::filesystem::path& path);

} // namespace ddcnn
