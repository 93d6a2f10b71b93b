#pragma once

#include <cstdint>
#include <filesystem>

#include "ddcnn/dataset.hpp"

namespace ddcnn {

/// Synthetic corpus generator: ten pattern classes that stand in for the
/// real driver images so every pipeline stage can be exercised without the
/// original data. Class k paints a bright block at a class-specific grid
/// position; each synthetic driver contributes its own background
/// (intensity base plus vertical gradient), and optional per-(driver,class)
/// scene textures make the corpus deliberately leak-prone for the
/// --leaky-split demonstration.
struct SynthOptions {
    int image_size = 64;
    int class_signal = 120;       // intensity added inside the class block
    int noise_amplitude = 12;     // per-pixel uniform noise in +-amplitude
    bool driver_cell_textures = false;  // strong per-(driver,class) backgrounds
};

/// Writes `images_per_class` PGM images per (driver, class) pair under
/// `<root>/<classname>/` plus `<root>/manifest.csv`, and returns the index.
/// The same seed reproduces the corpus byte for byte.
DatasetIndex synth_dataset(const std::filesystem::path& root, int num_drivers,
                           int images_per_class, std::uint64_t seed,
                           const SynthOptions& options = {});

/// Top-left corner and edge length of class k's block at a given image size.
struct BlockGeometry {
    int y0 = 0;
    int x0 = 0;
    int size = 0;
};
BlockGeometry synth_class_block(int class_idx, int image_size);

} // namespace ddcnn
