#include "ddcnn/preprocess.hpp"

#include "ddcnn/errors.hpp"

namespace ddcnn {

ImageBuffer Preprocessor::prepare(const ImageBuffer& raw) const {
    if (channels != 1 && channels != 3) {
        throw ConfigError("preprocessor target channels must be 1 or 3");
    }
    ImageBuffer image = raw;
    if (channels == 1 && image.channels == 3) {
        image = to_grayscale(image);
    } else if (channels == 3 && image.channels == 1) {
        ImageBuffer rgb{3, image.height, image.width, {}};
        rgb.pixels.resize(rgb.sample_count());
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                const std::uint8_t v = image.at(y, x);
                rgb.at(y, x, 0) = rgb.at(y, x, 1) = rgb.at(y, x, 2) = v;
            }
        }
        image = std::move(rgb);
    } else if (image.channels != channels) {
        throw DataError("cannot adapt a " + std::to_string(image.channels) +
                        "-channel image to " + std::to_string(channels) + " channels");
    }
    if (image.height != height || image.width != width) {
        image = resize_bilinear(image, height, width);
    }
    return image;
}

TensorF Preprocessor::run(const ImageBuffer& raw) const {
    return normalize(prepare(raw));
}

TensorF Preprocessor::load(const std::filesystem::path& path) const {
    return run(decode_image(path));
}

TensorF Preprocessor::load_augmented(const std::filesystem::path& path,
                                     const AugmentPolicy& policy, Rng& rng) const {
    return normalize(augment(prepare(decode_image(path)), policy, rng));
}

} // namespace ddcnn
