#include "csiloc/nn/loss.hpp"

#include <cmath>

#include "csiloc/error.hpp"

namespace csiloc::nn {

double euclidean_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw InputError("loss operands must have equal, non-zero length");
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sq += (pred[i] - target[i]) * (pred[i] - target[i]);
  return std::sqrt(sq);
}

double euclidean_loss(Point2 pred, Point2 target) { return distance(pred, target); }

double sequence_euclidean_loss(std::span<const Point2> preds, std::span<const Point2> targets) {
  if (preds.size() != targets.size()) throw InputError("sequence loss operands must have equal length");
  if (preds.empty()) throw InputError("sequence loss needs at least one step");
  double total = 0.0;
  for (std::size_t t = 0; t < preds.size(); ++t) total += distance(preds[t], targets[t]);
  return total / static_cast<double>(preds.size());
}

LossAndGrad euclidean_loss_rows(const Tensor& pred, const Tensor& target) {
  if (pred.dims() != target.dims() || pred.rank() == 0)
    throw InputError("loss shape mismatch: " + shape_string(pred.dims()) + " vs " + shape_string(target.dims()));
  const std::size_t d = pred.dims().back();
  const std::size_t rows = pred.size() / d;
  LossAndGrad out{0.0, Tensor(pred.dims())};
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = pred[r * d + k] - target[r * d + k];
      sq += diff * diff;
    }
    const double dist = std::sqrt(sq);
    out.value += dist;
    if (dist > 0.0)
      for (std::size_t k = 0; k < d; ++k)
        out.grad[r * d + k] = (pred[r * d + k] - target[r * d + k]) / (dist * static_cast<double>(rows));
  }
  out.value /= static_cast<double>(rows);
  return out;
}

}  // namespace csiloc::nn
