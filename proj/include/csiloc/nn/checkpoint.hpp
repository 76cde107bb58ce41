#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "csiloc/nn/layers.hpp"

namespace csiloc::nn {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// One layer of an "NNCK" file: kind tag plus its tensors in declaration order.
/// Parameter-free layers carry no tensors; dropout stores its rate as a [1] tensor.
struct CheckpointLayer {
  LayerKind kind = LayerKind::relu;
  std::vector<Tensor> tensors;
};

// Layout (little-endian):
//   "NNCK" | u16 version | u32 layer_count
//   per layer:  u8 kind | u32 tensor_count
//   per tensor: u32 rank | u32 dims[rank] | f64 data[prod(dims)]
void write_checkpoint(std::ostream& out, const std::vector<CheckpointLayer>& layers);
std::vector<CheckpointLayer> read_checkpoint(std::istream& in, const std::string& name);

void save_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointLayer>& layers);
std::vector<CheckpointLayer> load_checkpoint(const std::filesystem::path& path);

}  // namespace csiloc::nn
