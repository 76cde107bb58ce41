#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "csiloc/nn/checkpoint.hpp"
#include "csiloc/nn/layers.hpp"

namespace csiloc::nn {

/// Ordered layer stack with batch-first tensors.
class Sequential {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  /// Builds and initialises a stack; `input` is the per-example input shape.
  static Sequential build(const std::vector<LayerSpec>& specs, const Shape& input, Rng& rng);
  /// Rebuilds a stack from checkpoint tensors. Dropout layers are seeded from `dropout_seed`.
  static Sequential from_checkpoint(const std::vector<CheckpointLayer>& layers, std::uint64_t dropout_seed = 0);

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  Tensor forward(const Tensor& input, bool training);
  /// Const pass through layers [0, end).
  Tensor infer(const Tensor& input, std::size_t end = npos) const;
  Tensor backward(const Tensor& grad_output);

  std::vector<Tensor*> parameters();
  std::size_t parameter_count() const;
  void zero_grad();

  /// Per-example output shape after each layer.
  std::vector<Shape> trace_shapes(const Shape& input) const;

  std::vector<CheckpointLayer> to_checkpoint() const;
  Sequential clone() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace csiloc::nn
