#pragma once

#include <span>
#include <vector>

#include "csiloc/nn/layers.hpp"

namespace csiloc::nn {

/// Weights of a standard three-gate LSTM cell. Gate rows are stacked in the order
/// input (i), forget (f), candidate (g), output (o), each `hidden` rows tall.
struct LstmParams {
  Tensor input_weights;      // [4H, In]
  Tensor recurrent_weights;  // [4H, H]
  Tensor bias;               // [4H]

  LstmParams() = default;
  LstmParams(std::size_t input_size, std::size_t hidden_size);

  std::size_t input_size() const { return input_weights.dim(1); }
  std::size_t hidden_size() const { return recurrent_weights.dim(1); }
  void validate() const;
};

struct LstmCellState {
  std::vector<double> h;
  std::vector<double> c;
};

/// One step: c = f*c_prev + i*g, h = o*tanh(c), sigmoid gates, tanh candidate.
LstmCellState lstm_cell_step(std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev, const LstmParams& params);

/// Unrolled LSTM over a batch of sequences: [N,T,In] -> [N,T,H] (hidden state at
/// every step), starting from zero state.
class Lstm final : public Layer {
 public:
  Lstm(std::size_t input_size, std::size_t hidden_size);
  explicit Lstm(LstmParams params);

  LayerKind kind() const override { return LayerKind::lstm_cell; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& input, bool training) override;
  Tensor infer(const Tensor& input) const override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Tensor*> parameters() override;
  std::vector<const Tensor*> parameters() const override;

  /// Uniform +-1/sqrt(H) weights, zero bias except the forget gate at +1.
  void initialize(Rng& rng);
  LstmParams& params() { return params_; }
  const LstmParams& params() const { return params_; }

 private:
  struct StepCache {
    RowMatrix x;       // [N, In]
    RowMatrix h_prev;  // [N, H]
    RowMatrix c_prev;  // [N, H]
    RowMatrix gates;   // [N, 4H], post-activation
    RowMatrix tanh_c;  // [N, H]
  };

  Tensor run(const Tensor& input, std::vector<StepCache>* cache) const;

  LstmParams params_;
  std::vector<StepCache> cache_;
  Shape input_dims_;
};

}  // namespace csiloc::nn
