#pragma once

#include "ddcnn/image.hpp"
#include "ddcnn/rng.hpp"

namespace ddcnn {

/// Mild, label-preserving training-time augmentation. Never applied to
/// validation or production batches.
struct AugmentPolicy {
    double rotation_deg_max = 10.0;
    double shift_frac_max = 0.1;
    double brightness_frac_max = 0.1;
    bool enabled = true;
};

/// Deterministic core of the augmentation: rotate by `angle_deg` about the
/// image center, translate by (dx, dy) pixels, then scale intensities by
/// `brightness` (clamped to 8 bits). Sampling is inverse-mapped bilinear
/// with out-of-frame coordinates clamped to the edge (edge replication).
ImageBuffer apply_affine(const ImageBuffer& image, double angle_deg, double dx,
                         double dy, double brightness);

/// Draws rotation in +-rotation_deg_max, shifts in +-shift_frac_max of each
/// dimension, brightness in 1 +- brightness_frac_max, then applies them.
/// A disabled or all-zero policy returns the input unchanged.
ImageBuffer augment(const ImageBuffer& image, const AugmentPolicy& policy, Rng& rng);

} // namespace ddcnn
