#pragma once

#include <filesystem>

#include "ddcnn/augment.hpp"
#include "ddcnn/image.hpp"
#include "ddcnn/rng.hpp"
#include "ddcnn/tensor.hpp"

namespace ddcnn {

/// Decode -> channel adaptation -> bilinear resize -> [augment] -> /255.
///
/// Channel adaptation: a 3-channel target replicates grayscale inputs, a
/// 1-channel target converts RGB via BT.601 luma. With augmentation off the
/// pipeline is fully deterministic: same file, same tensor, bit for bit.
struct Preprocessor {
    int channels = 1;
    int height = 64;
    int width = 64;

    ImageBuffer prepare(const ImageBuffer& raw) const;
    TensorF run(const ImageBuffer& raw) const;
    TensorF load(const std::filesystem::path& path) const;

    /// Training-split batches only; validation and production batches are
    /// always built through the un-augmented entry points.
    TensorF load_augmented(const std::filesystem::path& path,
                           const AugmentPolicy& policy, Rng& rng) const;
};

} // namespace ddcnn
