#include "ddcnn/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "ddcnn/errors.hpp"

namespace ddcnn {

namespace {

static_assert(std::endian::native == std::endian::little,
              "weight container i/o assumes a little-endian host");

template <typename T>
void write_le(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw FormatError("weight container is truncated");
    return value;
}

} // namespace

void write_weight_container(const std::map<std::string, TensorF>& tensors,
                            const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");

    out.write(kWeightMagic, sizeof(kWeightMagic));
    write_le<std::uint32_t>(out, kWeightVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<std::uint8_t>(out, 0);  // dtype f32
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d : tensor.dims()) {
            write_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
        }
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::map<std::string, TensorF> read_weight_container(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");

    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kWeightMagic, sizeof(magic)) != 0) {
        throw FormatError("'" + path.string() + "' is not a weight container "
                          "(bad magic)");
    }
    const auto version = read_le<std::uint32_t>(in);
    if (version != kWeightVersion) {
        throw FormatError("unsupported weight container version " +
                          std::to_string(version));
    }
    const auto count = read_le<std::uint32_t>(in);

    std::map<std::string, TensorF> tensors;
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = read_le<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw FormatError("weight container is truncated");

        const auto dtype = read_le<std::uint8_t>(in);
        if (dtype != 0) {
            throw FormatError("unsupported dtype code " + std::to_string(dtype) +
                              " for tensor '" + name + "'");
        }
        const auto rank = read_le<std::uint32_t>(in);
        if (rank < 1 || rank > 4) {
            throw FormatError("tensor '" + name + "' has invalid rank " +
                              std::to_string(rank));
        }
        std::vector<std::size_t> dims(rank);
        std::size_t numel = 1;
        for (auto& d : dims) {
            const auto v = read_le<std::uint64_t>(in);
            if (v == 0) throw FormatError("tensor '" + name + "' has a zero dimension");
            d = static_cast<std::size_t>(v);
            numel *= d;
        }
        AlignedVector<float> data(numel);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(numel * sizeof(float)));
        if (!in) throw FormatError("weight container is truncated");

        if (!tensors.emplace(std::move(name), TensorF(std::move(dims), std::move(data)))
                 .second) {
            throw FormatError("duplicate tensor name in weight container");
        }
    }
    return tensors;
}

void save_weights(const ModelGraph& graph, const std::filesystem::path& path) {
    write_weight_container(graph.parameters, path);
}

void load_weights(ModelGraph& graph, const std::filesystem::path& path) {
    auto loaded = read_weight_container(path);

    // full validation before any mutation: a failed load leaves the model as it was
    for (const auto& [name, tensor] : graph.parameters) {
        auto it = loaded.find(name);
        if (it == loaded.end()) {
            throw MismatchError("weight container is missing tensor '" + name + "'");
        }
        if (it->second.dims() != tensor.dims()) {
            throw MismatchError("tensor '" + name + "' has shape " +
                                it->second.shape_string() + " but the model expects " +
                                tensor.shape_string());
        }
    }
    for (const auto& [name, tensor] : loaded) {
        (void)tensor;
        if (graph.parameters.find(name) == graph.parameters.end()) {
            throw MismatchError("weight container has unexpected tensor '" + name + "'");
        }
    }
    graph.parameters = std::move(loaded);
}

} // namespace ddcnn
