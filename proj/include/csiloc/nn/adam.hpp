#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csiloc/nn/tensor.hpp"

namespace csiloc::nn {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(std::size_t size, AdamHyper h) : first_moment(size, 0.0), second_moment(size, 0.0), hyper(h) {}
};

/// One bias-corrected Adam step applied in place.
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state);

/// Adam over a fixed set of parameter tensors, reading their gradient buffers.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor*> params, AdamHyper hyper = {});

  void step();
  void zero_grad();
  /// True when every parameter, gradient and moment is finite.
  bool all_finite() const;
  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<AdamState> states_;
};

}  // namespace csiloc::nn
