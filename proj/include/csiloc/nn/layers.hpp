#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "csiloc/nn/tensor.hpp"
#include "csiloc/rng.hpp"

namespace csiloc::nn {

enum class LayerKind : std::uint8_t {
  conv2d = 1,
  fully_connected = 2,
  lstm_cell = 3,
  relu = 4,
  dropout = 5,
};

const char* layer_kind_name(LayerKind kind);

/// Declarative description of one layer. Only the fields relevant to `kind` are read.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t filters = 0;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::size_t hidden_size = 0;
  double rate = 0.0;

  static LayerSpec conv(std::size_t kh, std::size_t kw, std::size_t filters);
  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec lstm(std::size_t in, std::size_t hidden);
  static LayerSpec relu();
  static LayerSpec dropout(double rate);

  /// Throws ConfigError when the invariants for `kind` do not hold.
  void validate() const;
};

/// A batch-first layer. forward() caches what backward() needs; infer() is const
/// and may be called concurrently on a frozen layer.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& input, bool training) = 0;
  virtual Tensor infer(const Tensor& input) const = 0;
  /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
  virtual Tensor backward(const Tensor& grad_output) = 0;
  virtual std::vector<Tensor*> parameters() { return {}; }
  virtual std::vector<const Tensor*> parameters() const { return {}; }
};

// ---------------------------------------------------------------- convolution

/// Stride-1 "same" convolution. input: [H,W,Cin] or [N,H,W,Cin];
/// kernels: [kh,kw,Cin,Cout]; bias: [Cout]. Output keeps the spatial dims.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct Conv2dGradients {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};

Conv2dGradients conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output);

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t kernel_h, std::size_t kernel_w, std::size_t in_channels, std::size_t filters);
  Conv2d(Tensor kernels, Tensor bias);

  LayerKind kind() const override { return LayerKind::conv2d; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input, bool training) override;
  Tensor infer(const Tensor& input) const override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Tensor*> parameters() override { return {&kernels_, &bias_}; }
  std::vector<const Tensor*> parameters() const override { return {&kernels_, &bias_}; }

  /// Kaiming-uniform kernels, zero bias.
  void initialize(Rng& rng);
  Tensor& kernels() { return kernels_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor kernels_;
  Tensor bias_;
  Tensor input_;  // last forward input
};

// ------------------------------------------------------------ fully connected

/// output = weights * input + bias. input: [n] or [N, ...] (flattened per row);
/// weights: [m, n]; bias: [m].
Tensor fully_connected_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

class FullyConnected final : public Layer {
 public:
  FullyConnected(std::size_t in_features, std::size_t out_features);
  FullyConnected(Tensor weights, Tensor bias);

  LayerKind kind() const override { return LayerKind::fully_connected; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input, bool training) override;
  Tensor infer(const Tensor& input) const override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Tensor*> parameters() override { return {&weights_, &bias_}; }
  std::vector<const Tensor*> parameters() const override { return {&weights_, &bias_}; }

  /// Kaiming-uniform weights, zero bias.
  void initialize(Rng& rng);
  std::size_t in_features() const { return weights_.dim(1); }
  std::size_t out_features() const { return weights_.dim(0); }
  Tensor& weights() { return weights_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weights_;
  Tensor bias_;
  Tensor input_;
};

// ---------------------------------------------------------------- activations

class Relu final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::relu; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& input, bool training) override;
  Tensor infer(const Tensor& input) const override;
  Tensor backward(const Tensor& grad_output) override;

 private:
  std::vector<bool> active_;
  Shape dims_;
};

/// Inverted dropout: in training, zero each element with probability `rate` and
/// scale survivors by 1/(1-rate); identity otherwise. Writes the keep mask
/// (0 or the survivor scale) to `mask` when given.
Tensor dropout_apply(const Tensor& input, double rate, Rng& rng, bool training,
                     std::vector<double>* mask = nullptr);

class Dropout final : public Layer {
 public:
  explicit Dropout(double rate, std::uint64_t seed = 0);

  LayerKind kind() const override { return LayerKind::dropout; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& input, bool training) override;
  Tensor infer(const Tensor& input) const override { return input; }
  Tensor backward(const Tensor& grad_output) override;
  double rate() const { return rate_; }
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  double rate_;
  Rng rng_;
  std::vector<double> mask_;
  bool has_mask_ = false;
};

/// Builds a freshly initialised layer for `spec`; `input` is the per-example input shape.
/// A zero `in_features` is taken from `input`.
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input, Rng& rng);

}  // namespace csiloc::nn
