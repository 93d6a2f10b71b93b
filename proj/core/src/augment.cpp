#include "ddcnn/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ddcnn/errors.hpp"

namespace ddcnn {

ImageBuffer apply_affine(const ImageBuffer& image, double angle_deg, double dx,
                         double dy, double brightness) {
    ImageBuffer out{image.channels, image.height, image.width, {}};
    out.pixels.resize(out.sample_count());

    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double cx = (image.width - 1) / 2.0;
    const double cy = (image.height - 1) / 2.0;

    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            // inverse map: undo translation, then rotate back about the center
            const double rx = (x - dx) - cx;
            const double ry = (y - dy) - cy;
            double sx = cos_t * rx + sin_t * ry + cx;
            double sy = -sin_t * rx + cos_t * ry + cy;
            sx = std::clamp(sx, 0.0, static_cast<double>(image.width - 1));
            sy = std::clamp(sy, 0.0, static_cast<double>(image.height - 1));

            const int x0 = static_cast<int>(sx);
            const int y0 = static_cast<int>(sy);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const int y1 = std::min(y0 + 1, image.height - 1);
            const double fx = sx - x0;
            const double fy = sy - y0;
            for (int c = 0; c < image.channels; ++c) {
                const double top = image.at(y0, x0, c) * (1.0 - fx) +
                                   image.at(y0, x1, c) * fx;
                const double bottom = image.at(y1, x0, c) * (1.0 - fx) +
                                      image.at(y1, x1, c) * fx;
                const double v = (top * (1.0 - fy) + bottom * fy) * brightness;
                out.at(y, x, c) = static_cast<std::uint8_t>(
                    std::clamp(std::lround(v), 0l, 255l));
            }
        }
    }
    return out;
}

ImageBuffer augment(const ImageBuffer& image, const AugmentPolicy& policy, Rng& rng) {
    if (policy.rotation_deg_max < 0.0 || policy.shift_frac_max < 0.0 ||
        policy.brightness_frac_max < 0.0) {
        throw ConfigError("augmentation policy ranges must be non-negative");
    }
    if (!policy.enabled) return image;

    // fixed draw order keeps the stream reproducible
    const double angle = rng.uniform(-policy.rotation_deg_max, policy.rotation_deg_max);
    const double dx =
        rng.uniform(-policy.shift_frac_max, policy.shift_frac_max) * image.width;
    const double dy =
        rng.uniform(-policy.shift_frac_max, policy.shift_frac_max) * image.height;
    const double brightness =
        rng.uniform(1.0 - policy.brightness_frac_max, 1.0 + policy.brightness_frac_max);

    if (angle == 0.0 && dx == 0.0 && dy == 0.0 && brightness == 1.0) return image;
    return apply_affine(image, angle, dx, dy, brightness);
}

} // namespace ddcnn
