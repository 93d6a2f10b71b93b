#include "ddcnn/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "ddcnn/errors.hpp"

namespace ddcnn {

namespace {

// Reads one whitespace-delimited PNM header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
    std::string token;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty()) break;
            continue;
        }
        token.push_back(static_cast<char>(c));
    }
    if (token.empty()) throw DataError("truncated PNM header");
    return token;
}

int pnm_int(std::istream& in) {
    const std::string token = pnm_token(in);
    try {
        return std::stoi(token);
    } catch (const std::exception&) {
        throw DataError("malformed PNM header token '" + token + "'");
    }
}

} // namespace

ImageBuffer decode_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image '" + path.string() + "'");

    const std::string magic = pnm_token(in);
    int channels;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw DataError("unsupported PNM magic '" + magic + "' in '" +
                        path.string() + "'");
    }
    const int width = pnm_int(in);
    const int height = pnm_int(in);
    const int maxval = pnm_int(in);
    if (width < 1 || height < 1) {
        throw DataError("invalid PNM dimensions in '" + path.string() + "'");
    }
    if (maxval < 1 || maxval > 255) {
        throw DataError("only 8-bit PNM images are supported ('" + path.string() + "')");
    }
    // the single whitespace byte after maxval was already consumed by pnm_token

    ImageBuffer image{channels, height, width, {}};
    image.pixels.resize(image.sample_count());
    in.read(reinterpret_cast<char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(image.pixels.size())) {
        throw DataError("truncated PNM payload in '" + path.string() + "'");
    }
    return image;
}

ImageBuffer decode_image(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open image '" + path.string() + "'");
    unsigned char head[8] = {};
    probe.read(reinterpret_cast<char*>(head), sizeof(head));
    const auto got = probe.gcount();
    probe.close();
    if (got < 2) throw DataError("image file '" + path.string() + "' is too short");

    if (head[0] == 'P' && (head[1] == '5' || head[1] == '6')) {
        return decode_pnm(path);
    }
    if (head[0] == 0xFF && head[1] == 0xD8) {
        return decode_jpeg(path);
    }
    if (got >= 8 && head[0] == 0x89 && head[1] == 'P' && head[2] == 'N' &&
        head[3] == 'G') {
        return decode_png(path);
    }
    throw DataError("unsupported image format in '" + path.string() +
                    "' (expected JPEG, PNG, or binary PGM/PPM)");
}

void encode_image(const ImageBuffer& image, const std::filesystem::path& path) {
    if (image.channels != 1 && image.channels != 3) {
        throw ShapeError("encode_image supports 1- or 3-channel buffers");
    }
    if (image.pixels.size() != image.sample_count()) {
        throw ShapeError("image buffer size does not match its dimensions");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << (image.channels == 1 ? "P5" : "P6") << "\n"
        << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ImageBuffer to_grayscale(const ImageBuffer& rgb) {
    if (rgb.channels != 3) {
        throw ShapeError("to_grayscale needs a 3-channel buffer, got " +
                         std::to_string(rgb.channels));
    }
    ImageBuffer gray{1, rgb.height, rgb.width, {}};
    gray.pixels.resize(gray.sample_count());
    for (int y = 0; y < rgb.height; ++y) {
        for (int x = 0; x < rgb.width; ++x) {
            const double luma = 0.299 * rgb.at(y, x, 0) + 0.587 * rgb.at(y, x, 1) +
                                0.114 * rgb.at(y, x, 2);
            gray.at(y, x) = static_cast<std::uint8_t>(std::lround(luma));
        }
    }
    return gray;
}

ImageBuffer resize_bilinear(const ImageBuffer& image, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) {
        throw ConfigError("resize target dimensions must be positive");
    }
    ImageBuffer out{image.channels, out_h, out_w, {}};
    out.pixels.resize(out.sample_count());

    const double scale_y = static_cast<double>(image.height) / out_h;
    const double scale_x = static_cast<double>(image.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double sy = (y + 0.5) * scale_y - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(image.height - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double fy = sy - y0;
        for (int x = 0; x < out_w; ++x) {
            double sx = (x + 0.5) * scale_x - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(image.width - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double fx = sx - x0;
            for (int c = 0; c < image.channels; ++c) {
                const double top = image.at(y0, x0, c) * (1.0 - fx) +
                                   image.at(y0, x1, c) * fx;
                const double bottom = image.at(y1, x0, c) * (1.0 - fx) +
                                      image.at(y1, x1, c) * fx;
                const double v = top * (1.0 - fy) + bottom * fy;
                out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
            }
        }
    }
    return out;
}

TensorF normalize(const ImageBuffer& image) {
    if (image.pixels.size() != image.sample_count()) {
        throw ShapeError("image buffer size does not match its dimensions");
    }
    TensorF out({static_cast<std::size_t>(image.channels),
                 static_cast<std::size_t>(image.height),
                 static_cast<std::size_t>(image.width)});
    for (int c = 0; c < image.channels; ++c) {
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                out(static_cast<std::size_t>(c), static_cast<std::size_t>(y),
                    static_cast<std::size_t>(x)) = image.at(y, x, c) / 255.0f;
            }
        }
    }
    return out;
}

} // namespace ddcnn
