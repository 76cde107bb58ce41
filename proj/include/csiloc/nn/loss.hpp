#pragma once

#include <span>

#include "csiloc/geometry.hpp"
#include "csiloc/nn/tensor.hpp"

namespace csiloc::nn {

/// Localization loss ||pred - target||_2 (a distance, not its square).
double euclidean_loss(std::span<const double> pred, std::span<const double> target);
double euclidean_loss(Point2 pred, Point2 target);

/// Mean over the T steps of the per-step Euclidean distance.
double sequence_euclidean_loss(std::span<const Point2> preds, std::span<const Point2> targets);

struct LossAndGrad {
  double value = 0.0;
  Tensor grad;
};

/// Mean Euclidean distance over all coordinate rows of `pred` ([..., D]) and its
/// gradient. A [N,T,2] batch therefore yields the batch mean of the sequence loss.
/// Rows with zero distance contribute a zero subgradient.
LossAndGrad euclidean_loss_rows(const Tensor& pred, const Tensor& target);

}  // namespace csiloc::nn
