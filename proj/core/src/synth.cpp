#include "ddcnn/synth.hpp"

#include <algorithm>
#include <fstream>

#include "ddcnn/errors.hpp"
#include "ddcnn/image.hpp"
#include "ddcnn/rng.hpp"

namespace ddcnn {

namespace {

constexpr std::uint64_t kDriverStream = 0xD1;
constexpr std::uint64_t kCellStream = 0xCE;
constexpr std::uint64_t kNoiseStream = 0x5E;

struct DriverBackground {
    int base;       // [30, 90)
    int gradient;   // [0, 40), added as gradient * y / (H-1)
};

DriverBackground driver_background(const Rng& corpus_rng, int driver) {
    Rng rng = corpus_rng.fork(kDriverStream).fork(static_cast<std::uint64_t>(driver));
    DriverBackground bg;
    bg.base = 30 + static_cast<int>(rng.below(60));
    bg.gradient = static_cast<int>(rng.below(40));
    return bg;
}

} // namespace

BlockGeometry synth_class_block(int class_idx, int image_size) {
    const int row = class_idx / 5;
    const int col = class_idx % 5;
    BlockGeometry block;
    block.size = std::max(2, image_size * 10 / 64);
    block.y0 = (8 + row * 30) * image_size / 64;
    block.x0 = (3 + col * 12) * image_size / 64;
    return block;
}

DatasetIndex synth_dataset(const std::filesystem::path& root, int num_drivers,
                           int images_per_class, std::uint64_t seed,
                           const SynthOptions& options) {
    if (num_drivers < 1 || images_per_class < 1) {
        throw ConfigError("synthetic corpus needs at least one driver and one image per class");
    }
    if (options.image_size < 16) {
        throw ConfigError("synthetic image size must be >= 16");
    }

    std::filesystem::create_directories(root);
    const Rng corpus_rng(seed);
    const int size = options.image_size;

    DatasetIndex index;
    for (int k = 0; k < 10; ++k) {
        std::filesystem::create_directories(root / kClassNames[k]);
    }

    std::vector<int> canvas(static_cast<std::size_t>(size) * size);
    for (int d = 0; d < num_drivers; ++d) {
        char driver_name[16];
        std::snprintf(driver_name, sizeof(driver_name), "p%03d", d + 1);
        const DriverBackground bg = driver_background(corpus_rng, d);

        for (int k = 0; k < 10; ++k) {
            const BlockGeometry block = synth_class_block(k, size);

            // scene texture fixed per (driver, class): images within the
            // cell are near-duplicates, which is exactly what makes an
            // image-level split leak
            struct Rect {
                int y0, x0, h, w, delta;
            };
            std::vector<Rect> texture;
            if (options.driver_cell_textures) {
                Rng cell_rng = corpus_rng.fork(kCellStream)
                                   .fork(static_cast<std::uint64_t>(d))
                                   .fork(static_cast<std::uint64_t>(k));
                for (int r = 0; r < 3; ++r) {
                    Rect rect;
                    rect.h = 6 + static_cast<int>(cell_rng.below(static_cast<std::uint64_t>(size / 2)));
                    rect.w = 6 + static_cast<int>(cell_rng.below(static_cast<std::uint64_t>(size / 2)));
                    rect.y0 = static_cast<int>(cell_rng.below(static_cast<std::uint64_t>(size - rect.h)));
                    rect.x0 = static_cast<int>(cell_rng.below(static_cast<std::uint64_t>(size - rect.w)));
                    rect.delta = static_cast<int>(cell_rng.below(121)) - 60;
                    texture.push_back(rect);
                }
            }

            for (int i = 0; i < images_per_class; ++i) {
                for (int y = 0; y < size; ++y) {
                    const int row_value = bg.base + bg.gradient * y / (size - 1);
                    for (int x = 0; x < size; ++x) {
                        canvas[static_cast<std::size_t>(y) * size + x] = row_value;
                    }
                }
                for (const auto& rect : texture) {
                    for (int y = rect.y0; y < rect.y0 + rect.h; ++y) {
                        for (int x = rect.x0; x < rect.x0 + rect.w; ++x) {
                            canvas[static_cast<std::size_t>(y) * size + x] += rect.delta;
                        }
                    }
                }
                for (int y = block.y0; y < block.y0 + block.size; ++y) {
                    for (int x = block.x0; x < block.x0 + block.size; ++x) {
                        canvas[static_cast<std::size_t>(y) * size + x] +=
                            options.class_signal;
                    }
                }

                ImageBuffer image{1, size, size, {}};
                image.pixels.resize(canvas.size());
                if (options.noise_amplitude > 0) {
                    Rng noise_rng = corpus_rng.fork(kNoiseStream)
                                        .fork(static_cast<std::uint64_t>(d))
                                        .fork(static_cast<std::uint64_t>(k))
                                        .fork(static_cast<std::uint64_t>(i));
                    const auto span = static_cast<std::uint64_t>(2 * options.noise_amplitude + 1);
                    for (std::size_t p = 0; p < canvas.size(); ++p) {
                        const int noise =
                            static_cast<int>(noise_rng.below(span)) - options.noise_amplitude;
                        image.pixels[p] = static_cast<std::uint8_t>(
                            std::clamp(canvas[p] + noise, 0, 255));
                    }
                } else {
                    for (std::size_t p = 0; p < canvas.size(); ++p) {
                        image.pixels[p] =
                            static_cast<std::uint8_t>(std::clamp(canvas[p], 0, 255));
                    }
                }

                char file_name[32];
                std::snprintf(file_name, sizeof(file_name), "%s_%04d.pgm", driver_name, i);
                const std::string rel =
                    std::string(kClassNames[k]) + "/" + file_name;
                encode_image(image, root / rel);

                DatasetRow row;
                row.driver_id = driver_name;
                row.label = kClassNames[k];
                row.image_path = rel;
                index.rows.push_back(std::move(row));
            }
        }
    }

    std::ofstream manifest(root / "manifest.csv", std::ios::trunc);
    if (!manifest) throw IoError("cannot write synthetic manifest");
    manifest << "subject,classname,img\n";
    for (const auto& row : index.rows) {
        const std::string file = row.image_path.substr(row.image_path.find('/') + 1);
        manifest << row.driver_id << "," << row.label << "," << file << "\n";
    }
    return index;
}

} // namespace ddcnn
