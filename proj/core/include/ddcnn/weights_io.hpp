#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "ddcnn/graph.hpp"
#include "ddcnn/tensor.hpp"

namespace ddcnn {

// Weight container format, bit-exact:
//   magic "DDWT" | u32le version (=1) | u32le tensor count
//   per tensor: u32le name length | UTF-8 name | u8 dtype (0 = f32) |
//               u32le rank | rank x u64le dims | little-endian f32 data
// No padding, no alignment.

inline constexpr char kWeightMagic[4] = {'D', 'D', 'W', 'T'};
inline constexpr std::uint32_t kWeightVersion = 1;

void save_weights(const ModelGraph& graph, const std::filesystem::path& path);

/// Loads a container saved by save_weights. The tensor names and shapes
/// must agree exactly with the graph's bound parameters; on any failure the
/// graph is left untouched. Distinct failures raise distinct types:
/// IoError (unreadable file), FormatError (magic/version/truncation),
/// MismatchError (name or shape disagreement).
void load_weights(ModelGraph& graph, const std::filesystem::path& path);

/// Container parsing without a target graph (used by load_weights and by
/// tooling that inspects files).
std::map<std::string, TensorF> read_weight_container(const std::filesystem::path& path);

void write_weight_container(const std::map<std::string, TensorF>& tensors,
                            const std::filesystem::path& path);

} // namespace ddcnn
