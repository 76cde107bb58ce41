#include "csiloc/nn/lstm.hpp"

#include <cmath>
#include <string>

#include "csiloc/error.hpp"

namespace csiloc::nn {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

LstmParams::LstmParams(std::size_t input_size, std::size_t hidden_size)
    : input_weights({4 * hidden_size, input_size}),
      recurrent_weights({4 * hidden_size, hidden_size}),
      bias({4 * hidden_size}) {}

void LstmParams::validate() const {
  if (input_weights.rank() != 2 || recurrent_weights.rank() != 2 || bias.rank() != 1)
    throw InputError("lstm parameters must be [4H,In], [4H,H] and [4H]");
  const std::size_t h = recurrent_weights.dim(1);
  if (recurrent_weights.dim(0) != 4 * h || input_weights.dim(0) != 4 * h || bias.dim(0) != 4 * h)
    throw InputError("lstm parameter rows must equal 4 * hidden_size");
}

LstmCellState lstm_cell_step(std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev, const LstmParams& params) {
  params.validate();
  const std::size_t hidden = params.hidden_size(), in = params.input_size();
  if (x.size() != in) throw InputError("lstm input has " + std::to_string(x.size()) + " values, expected " + std::to_string(in));
  if (h_prev.size() != hidden || c_prev.size() != hidden) throw InputError("lstm state size mismatch");

  const auto wx = params.input_weights.matrix(4 * hidden, in);
  const auto wh = params.recurrent_weights.matrix(4 * hidden, hidden);
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(in));
  const Eigen::Map<const Eigen::VectorXd> hv(h_prev.data(), static_cast<Eigen::Index>(hidden));
  const Eigen::Map<const Eigen::VectorXd> bv(params.bias.data().data(), static_cast<Eigen::Index>(4 * hidden));
  const Eigen::VectorXd pre = wx * xv + wh * hv + bv;

  LstmCellState next{std::vector<double>(hidden), std::vector<double>(hidden)};
  for (std::size_t j = 0; j < hidden; ++j) {
    const double i = sigmoid(pre(static_cast<Eigen::Index>(j)));
    const double f = sigmoid(pre(static_cast<Eigen::Index>(hidden + j)));
    const double g = std::tanh(pre(static_cast<Eigen::Index>(2 * hidden + j)));
    const double o = sigmoid(pre(static_cast<Eigen::Index>(3 * hidden + j)));
    next.c[j] = f * c_prev[j] + i * g;
    next.h[j] = o * std::tanh(next.c[j]);
  }
  return next;
}

Lstm::Lstm(std::size_t input_size, std::size_t hidden_size) : params_(input_size, hidden_size) {
  LayerSpec::lstm(input_size, hidden_size).validate();
}

Lstm::Lstm(LstmParams params) : params_(std::move(params)) { params_.validate(); }

std::vector<Tensor*> Lstm::parameters() {
  return {&params_.input_weights, &params_.recurrent_weights, &params_.bias};
}

std::vector<const Tensor*> Lstm::parameters() const {
  return {&params_.input_weights, &params_.recurrent_weights, &params_.bias};
}

void Lstm::initialize(Rng& rng) {
  const std::size_t hidden = params_.hidden_size();
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : params_.input_weights.data()) v = dist(rng);
  for (auto& v : params_.recurrent_weights.data()) v = dist(rng);
  for (std::size_t j = 0; j < 4 * hidden; ++j) params_.bias[j] = (j >= hidden && j < 2 * hidden) ? 1.0 : 0.0;
}

Shape Lstm::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != params_.input_size())
    throw InputError("lstm expects [T," + std::to_string(params_.input_size()) + "], got " + shape_string(input));
  return {input[0], params_.hidden_size()};
}

Tensor Lstm::run(const Tensor& input, std::vector<StepCache>* cache) const {
  if (input.rank() != 3 || input.dim(2) != params_.input_size())
    throw InputError("lstm expects [N,T," + std::to_string(params_.input_size()) + "], got " +
                     shape_string(input.dims()));
  const auto n = static_cast<Eigen::Index>(input.dim(0));
  const std::size_t steps = input.dim(1), in = input.dim(2), hidden = params_.hidden_size();
  const auto hs = static_cast<Eigen::Index>(hidden);
  const auto wx = params_.input_weights.matrix(4 * hidden, in);
  const auto wh = params_.recurrent_weights.matrix(4 * hidden, hidden);
  const auto b = params_.bias.matrix(1, 4 * hidden);

  Tensor out({input.dim(0), steps, hidden});
  RowMatrix h = RowMatrix::Zero(n, hs), c = RowMatrix::Zero(n, hs);
  if (cache) cache->assign(steps, StepCache{});
  for (std::size_t t = 0; t < steps; ++t) {
    RowMatrix x(n, static_cast<Eigen::Index>(in));
    for (Eigen::Index r = 0; r < n; ++r)
      for (std::size_t k = 0; k < in; ++k)
        x(r, static_cast<Eigen::Index>(k)) = input[(static_cast<std::size_t>(r) * steps + t) * in + k];
    RowMatrix gates = x * wx.transpose();
    gates.noalias() += h * wh.transpose();
    gates.rowwise() += b.row(0);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index j = 0; j < hs; ++j) {
        gates(r, j) = sigmoid(gates(r, j));
        gates(r, hs + j) = sigmoid(gates(r, hs + j));
        gates(r, 2 * hs + j) = std::tanh(gates(r, 2 * hs + j));
        gates(r, 3 * hs + j) = sigmoid(gates(r, 3 * hs + j));
      }
    }
    RowMatrix c_next = gates.middleCols(hs, hs).cwiseProduct(c) + gates.leftCols(hs).cwiseProduct(gates.middleCols(2 * hs, hs));
    RowMatrix tanh_c = c_next.array().tanh().matrix();
    RowMatrix h_next = gates.rightCols(hs).cwiseProduct(tanh_c);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index j = 0; j < hs; ++j)
        out[(static_cast<std::size_t>(r) * steps + t) * hidden + static_cast<std::size_t>(j)] = h_next(r, j);
    if (cache) {
      auto& s = (*cache)[t];
      s.x = std::move(x);
      s.h_prev = std::move(h);
      s.c_prev = std::move(c);
      s.gates = std::move(gates);
      s.tanh_c = std::move(tanh_c);
    }
    h = std::move(h_next);
    c = std::move(c_next);
  }
  return out;
}

Tensor Lstm::forward(const Tensor& input, bool /*training*/) {
  input_dims_ = input.dims();
  return run(input, &cache_);
}

Tensor Lstm::infer(const Tensor& input) const { return run(input, nullptr); }

Tensor Lstm::backward(const Tensor& grad_output) {
  if (cache_.empty()) throw UsageError("lstm backward called without a cached forward pass");
  const std::size_t batch = input_dims_[0], steps = input_dims_[1], in = input_dims_[2];
  const std::size_t hidden = params_.hidden_size();
  require_shape(grad_output, {batch, steps, hidden}, "lstm grad_output");
  const auto n = static_cast<Eigen::Index>(batch);
  const auto hs = static_cast<Eigen::Index>(hidden);
  const auto wx = params_.input_weights.matrix(4 * hidden, in);
  const auto wh = params_.recurrent_weights.matrix(4 * hidden, hidden);
  auto gwx = params_.input_weights.grad_matrix(4 * hidden, in);
  auto gwh = params_.recurrent_weights.grad_matrix(4 * hidden, hidden);
  auto gb = params_.bias.grad_matrix(1, 4 * hidden);

  Tensor grad_input(input_dims_);
  RowMatrix dh_next = RowMatrix::Zero(n, hs), dc_next = RowMatrix::Zero(n, hs);
  RowMatrix dpre(n, 4 * hs);
  for (std::size_t t = steps; t-- > 0;) {
    const auto& s = cache_[t];
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index j = 0; j < hs; ++j) {
        const double i = s.gates(r, j), f = s.gates(r, hs + j), g = s.gates(r, 2 * hs + j), o = s.gates(r, 3 * hs + j);
        const double tc = s.tanh_c(r, j);
        const double dh = grad_output[(static_cast<std::size_t>(r) * steps + t) * hidden + static_cast<std::size_t>(j)] + dh_next(r, j);
        const double dc = dc_next(r, j) + dh * o * (1.0 - tc * tc);
        dpre(r, j) = dc * g * i * (1.0 - i);
        dpre(r, hs + j) = dc * s.c_prev(r, j) * f * (1.0 - f);
        dpre(r, 2 * hs + j) = dc * i * (1.0 - g * g);
        dpre(r, 3 * hs + j) = dh * tc * o * (1.0 - o);
        dc_next(r, j) = dc * f;
      }
    }
    gwx.noalias() += dpre.transpose() * s.x;
    gwh.noalias() += dpre.transpose() * s.h_prev;
    gb.row(0) += dpre.colwise().sum();
    const RowMatrix dx = dpre * wx;
    for (Eigen::Index r = 0; r < n; ++r)
      for (std::size_t k = 0; k < in; ++k)
        grad_input[(static_cast<std::size_t>(r) * steps + t) * in + k] = dx(r, static_cast<Eigen::Index>(k));
    dh_next.noalias() = dpre * wh;
  }
  return grad_input;
}

}  // namespace csiloc::nn
