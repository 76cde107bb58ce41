#include "csiloc/nn/checkpoint.hpp"

#include <fstream>

#include "csiloc/binary_io.hpp"
#include "csiloc/error.hpp"

namespace csiloc::nn {

namespace {

constexpr std::uint32_t kMaxRank = 8;

bool known_kind(std::uint8_t tag) { return tag >= 1 && tag <= 5; }

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<CheckpointLayer>& layers) {
  io::write_magic(out, "NNCK");
  io::write_pod<std::uint16_t>(out, kCheckpointVersion);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& layer : layers) {
    io::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(layer.kind));
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.tensors.size()));
    for (const auto& t : layer.tensors) {
      io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
      for (auto d : t.dims()) io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(d));
      io::write_array<double>(out, t.data());
    }
  }
}

std::vector<CheckpointLayer> read_checkpoint(std::istream& in, const std::string& name) {
  io::expect_magic(in, "NNCK", name);
  const auto version = io::read_pod<std::uint16_t>(in, "checkpoint version");
  if (version != kCheckpointVersion)
    throw DataError(name + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = io::read_pod<std::uint32_t>(in, "layer count");
  std::vector<CheckpointLayer> layers;
  layers.reserve(count);
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto tag = io::read_pod<std::uint8_t>(in, "layer kind");
    if (!known_kind(tag)) throw DataError(name + ": layer " + std::to_string(l) + " has unknown kind tag " + std::to_string(tag));
    CheckpointLayer layer{static_cast<LayerKind>(tag), {}};
    const auto tensors = io::read_pod<std::uint32_t>(in, "tensor count");
    for (std::uint32_t k = 0; k < tensors; ++k) {
      const auto rank = io::read_pod<std::uint32_t>(in, "tensor rank");
      if (rank == 0 || rank > kMaxRank) throw DataError(name + ": invalid tensor rank " + std::to_string(rank));
      Shape dims(rank);
      for (auto& d : dims) {
        d = io::read_pod<std::uint32_t>(in, "tensor dims");
        if (d == 0) throw DataError(name + ": zero tensor dimension in layer " + std::to_string(l));
      }
      Tensor t(dims);
      io::read_array<double>(in, t.data(), "tensor data");
      layer.tensors.push_back(std::move(t));
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointLayer>& layers) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  write_checkpoint(out, layers);
  if (!out) throw DataError(path.string() + ": write failed");
}

std::vector<CheckpointLayer> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open checkpoint");
  return read_checkpoint(in, path.string());
}

}  // namespace csiloc::nn
