#include "csiloc/nn/layers.hpp"

#include <cmath>
#include <string>

#include "csiloc/error.hpp"
#include "csiloc/nn/lstm.hpp"

namespace csiloc::nn {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::lstm_cell: return "lstm_cell";
    case LayerKind::relu: return "relu";
    case LayerKind::dropout: return "dropout";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(std::size_t kh, std::size_t kw, std::size_t filters) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.filters = filters;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::fully_connected;
  s.in_features = in;
  s.out_features = out;
  return s;
}

LayerSpec LayerSpec::lstm(std::size_t in, std::size_t hidden) {
  LayerSpec s;
  s.kind = LayerKind::lstm_cell;
  s.in_features = in;
  s.hidden_size = hidden;
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.rate = rate;
  return s;
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::conv2d:
      if (kernel_h == 0 || kernel_w == 0 || kernel_h % 2 == 0 || kernel_w % 2 == 0)
        throw ConfigError("conv kernel dims must be odd and >= 1");
      if (filters == 0) throw ConfigError("conv filter count must be >= 1");
      break;
    case LayerKind::fully_connected:
      if (in_features == 0 || out_features == 0) throw ConfigError("fully connected sizes must be >= 1");
      break;
    case LayerKind::lstm_cell:
      if (in_features == 0 || hidden_size == 0) throw ConfigError("lstm sizes must be >= 1");
      break;
    case LayerKind::dropout:
      if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
      break;
    case LayerKind::relu:
      break;
  }
}

namespace {

void kaiming_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = dist(rng);
}

struct ConvGeometry {
  std::size_t n, h, w, cin, kh, kw, cout;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels) {
  if (kernels.rank() != 4) throw InputError("conv kernels must be [kh,kw,Cin,Cout]");
  ConvGeometry g{};
  if (input.rank() == 3) {
    g.n = 1;
    g.h = input.dim(0);
    g.w = input.dim(1);
    g.cin = input.dim(2);
  } else if (input.rank() == 4) {
    g.n = input.dim(0);
    g.h = input.dim(1);
    g.w = input.dim(2);
    g.cin = input.dim(3);
  } else {
    throw InputError("conv input must be [H,W,C] or [N,H,W,C], got " + shape_string(input.dims()));
  }
  g.kh = kernels.dim(0);
  g.kw = kernels.dim(1);
  g.cout = kernels.dim(3);
  if (g.kh % 2 == 0 || g.kw % 2 == 0) throw InputError("conv kernel dims must be odd");
  if (kernels.dim(2) != g.cin)
    throw InputError("conv kernel expects " + std::to_string(kernels.dim(2)) + " input channels, input has " +
                     std::to_string(g.cin));
  return g;
}

// Row (y,x) of the column matrix holds the zero-padded window of one image in
// (ky,kx,ci) order, matching the row-major flattening of the kernel tensor's first
// three axes. Working one image at a time keeps the buffer cache-resident.
void im2col_image(const double* in, const ConvGeometry& g, RowMatrix& cols) {
  const std::size_t k = g.kh * g.kw * g.cin;
  cols.setZero(static_cast<Eigen::Index>(g.h * g.w), static_cast<Eigen::Index>(k));
  const long ph = static_cast<long>(g.kh / 2), pw = static_cast<long>(g.kw / 2);
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      double* row = cols.row(static_cast<Eigen::Index>(y * g.w + x)).data();
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const long yy = static_cast<long>(y + ky) - ph;
        if (yy < 0 || yy >= static_cast<long>(g.h)) continue;
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const long xx = static_cast<long>(x + kx) - pw;
          if (xx < 0 || xx >= static_cast<long>(g.w)) continue;
          const double* src = in + (static_cast<std::size_t>(yy) * g.w + static_cast<std::size_t>(xx)) * g.cin;
          std::copy(src, src + g.cin, row + (ky * g.kw + kx) * g.cin);
        }
      }
    }
}

void col2im_image(const RowMatrix& cols, const ConvGeometry& g, double* out) {
  const long ph = static_cast<long>(g.kh / 2), pw = static_cast<long>(g.kw / 2);
  for (std::size_t y = 0; y < g.h; ++y)
    for (std::size_t x = 0; x < g.w; ++x) {
      const double* row = cols.row(static_cast<Eigen::Index>(y * g.w + x)).data();
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const long yy = static_cast<long>(y + ky) - ph;
        if (yy < 0 || yy >= static_cast<long>(g.h)) continue;
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const long xx = static_cast<long>(x + kx) - pw;
          if (xx < 0 || xx >= static_cast<long>(g.w)) continue;
          double* dst = out + (static_cast<std::size_t>(yy) * g.w + static_cast<std::size_t>(xx)) * g.cin;
          const double* src = row + (ky * g.kw + kx) * g.cin;
          for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
        }
      }
    }
}

Shape conv_output_dims(const Tensor& input, std::size_t cout) {
  Shape out = input.dims();
  out.back() = cout;
  return out;
}

Tensor conv_apply(const Tensor& input, const Tensor& kernels, const Tensor& bias, const ConvGeometry& g) {
  Tensor out(conv_output_dims(input, g.cout));
  const std::size_t k = g.kh * g.kw * g.cin, pixels = g.h * g.w;
  const auto kmat = kernels.matrix(k, g.cout);
  const auto brow = bias.matrix(1, g.cout).row(0);
  RowMatrix cols;
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col_image(input.data().data() + n * pixels * g.cin, g, cols);
    MatrixMap out_m(out.data().data() + n * pixels * g.cout, static_cast<Eigen::Index>(pixels),
                    static_cast<Eigen::Index>(g.cout));
    out_m.noalias() = cols * kmat;
    out_m.rowwise() += brow;
  }
  return out;
}

// Accumulates kernel and bias gradients into the given buffers and returns the input gradient.
Tensor conv_backprop(const Tensor& input, const Tensor& kernels, const Tensor& grad_output, const ConvGeometry& g,
                     MatrixMap kernel_grad, MatrixMap bias_grad) {
  const std::size_t k = g.kh * g.kw * g.cin, pixels = g.h * g.w;
  const auto kmat = kernels.matrix(k, g.cout);
  Tensor grad_input(input.dims());
  RowMatrix cols, gcols;
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col_image(input.data().data() + n * pixels * g.cin, g, cols);
    ConstMatrixMap gout(grad_output.data().data() + n * pixels * g.cout, static_cast<Eigen::Index>(pixels),
                        static_cast<Eigen::Index>(g.cout));
    kernel_grad.noalias() += cols.transpose() * gout;
    bias_grad.row(0) += gout.colwise().sum();
    gcols.noalias() = gout * kmat.transpose();
    col2im_image(gcols, g, grad_input.data().data() + n * pixels * g.cin);
  }
  return grad_input;
}

}  // namespace

// ---------------------------------------------------------------- convolution

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const auto g = conv_geometry(input, kernels);
  require_shape(bias, {g.cout}, "conv bias");
  return conv_apply(input, kernels, bias, g);
}

Conv2dGradients conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output) {
  const auto g = conv_geometry(input, kernels);
  require_shape(grad_output, conv_output_dims(input, g.cout), "conv grad_output");
  Conv2dGradients grads{Tensor(), Tensor(kernels.dims()), Tensor({g.cout})};
  grads.input = conv_backprop(input, kernels, grad_output, g, grads.kernels.matrix(g.kh * g.kw * g.cin, g.cout),
                              grads.bias.matrix(1, g.cout));
  return grads;
}

Conv2d::Conv2d(std::size_t kernel_h, std::size_t kernel_w, std::size_t in_channels, std::size_t filters)
    : kernels_({kernel_h, kernel_w, in_channels, filters}), bias_({filters}) {
  LayerSpec::conv(kernel_h, kernel_w, filters).validate();
}

Conv2d::Conv2d(Tensor kernels, Tensor bias) : kernels_(std::move(kernels)), bias_(std::move(bias)) {
  if (kernels_.rank() != 4 || bias_.rank() != 1 || bias_.dim(0) != kernels_.dim(3))
    throw InputError("conv parameters must be [kh,kw,Cin,Cout] and [Cout]");
  LayerSpec::conv(kernels_.dim(0), kernels_.dim(1), kernels_.dim(3)).validate();
}

void Conv2d::initialize(Rng& rng) {
  kaiming_uniform(kernels_, kernels_.dim(0) * kernels_.dim(1) * kernels_.dim(2), rng);
  for (auto& b : bias_.data()) b = 0.0;
}

Shape Conv2d::output_shape(const Shape& input) const {
  if (input.empty() || input.back() != kernels_.dim(2))
    throw InputError("conv input channel mismatch for " + shape_string(input));
  Shape out = input;
  out.back() = kernels_.dim(3);
  return out;
}

Tensor Conv2d::forward(const Tensor& input, bool /*training*/) {
  const auto g = conv_geometry(input, kernels_);
  input_ = input;
  return conv_apply(input, kernels_, bias_, g);
}

Tensor Conv2d::infer(const Tensor& input) const { return conv2d_forward(input, kernels_, bias_); }

Tensor Conv2d::backward(const Tensor& grad_output) {
  if (input_.empty()) throw UsageError("conv2d backward called without a cached forward pass");
  const auto g = conv_geometry(input_, kernels_);
  require_shape(grad_output, conv_output_dims(input_, g.cout), "conv grad_output");
  kernels_.ensure_grad();
  bias_.ensure_grad();
  return conv_backprop(input_, kernels_, grad_output, g, kernels_.grad_matrix(g.kh * g.kw * g.cin, g.cout),
                       bias_.grad_matrix(1, g.cout));
}

// ------------------------------------------------------------ fully connected

namespace {

std::size_t fc_rows(const Tensor& input, std::size_t n_in) {
  if (input.rank() == 1) {
    if (input.dim(0) != n_in)
      throw InputError("fully connected expects " + std::to_string(n_in) + " inputs, got " +
                       std::to_string(input.dim(0)));
    return 1;
  }
  if (input.rank() < 2 || input.size() / input.dim(0) != n_in)
    throw InputError("fully connected expects rows of " + std::to_string(n_in) + " inputs, got " +
                     shape_string(input.dims()));
  return input.dim(0);
}

Tensor fc_apply(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  const std::size_t rows = fc_rows(input, n);
  Tensor out(input.rank() == 1 ? Shape{m} : Shape{rows, m});
  auto out_m = out.matrix(rows, m);
  out_m.noalias() = input.matrix(rows, n) * weights.matrix(m, n).transpose();
  out_m.rowwise() += bias.matrix(1, m).row(0);
  return out;
}

}  // namespace

Tensor fully_connected_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2) throw InputError("fully connected weights must be [m, n]");
  require_shape(bias, {weights.dim(0)}, "fully connected bias");
  return fc_apply(input, weights, bias);
}

FullyConnected::FullyConnected(std::size_t in_features, std::size_t out_features)
    : weights_({out_features, in_features}), bias_({out_features}) {}

FullyConnected::FullyConnected(Tensor weights, Tensor bias) : weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.rank() != 2) throw InputError("fully connected weights must be [m, n]");
  require_shape(bias_, {weights_.dim(0)}, "fully connected bias");
}

void FullyConnected::initialize(Rng& rng) {
  kaiming_uniform(weights_, weights_.dim(1), rng);
  for (auto& b : bias_.data()) b = 0.0;
}

Shape FullyConnected::output_shape(const Shape& input) const {
  if (shape_size(input) != in_features())
    throw InputError("fully connected expects " + std::to_string(in_features()) + " inputs, got " +
                     shape_string(input));
  return {out_features()};
}

Tensor FullyConnected::forward(const Tensor& input, bool /*training*/) {
  input_ = input;
  return fc_apply(input, weights_, bias_);
}

Tensor FullyConnected::infer(const Tensor& input) const { return fc_apply(input, weights_, bias_); }

Tensor FullyConnected::backward(const Tensor& grad_output) {
  if (input_.empty()) throw UsageError("fully connected backward called without a cached forward pass");
  const std::size_t m = out_features(), n = in_features();
  const std::size_t rows = fc_rows(input_, n);
  if (grad_output.size() != rows * m) throw InputError("fully connected grad_output size mismatch");
  const auto gout = grad_output.matrix(rows, m);
  weights_.grad_matrix(m, n).noalias() += gout.transpose() * input_.matrix(rows, n);
  bias_.grad_matrix(1, m).row(0) += gout.colwise().sum();
  Tensor grad_input(input_.dims());
  grad_input.matrix(rows, n).noalias() = gout * weights_.matrix(m, n);
  return grad_input;
}

// ---------------------------------------------------------------- activations

Tensor Relu::forward(const Tensor& input, bool /*training*/) {
  dims_ = input.dims();
  active_.assign(input.size(), false);
  Tensor out = input;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] > 0.0)
      active_[i] = true;
    else
      out[i] = 0.0;
  }
  return out;
}

Tensor Relu::infer(const Tensor& input) const {
  Tensor out = input;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor Relu::backward(const Tensor& grad_output) {
  if (dims_.empty()) throw UsageError("relu backward called without a cached forward pass");
  require_shape(grad_output, dims_, "relu grad_output");
  Tensor g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!active_[i]) g[i] = 0.0;
  return g;
}

Tensor dropout_apply(const Tensor& input, double rate, Rng& rng, bool training, std::vector<double>* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) {
    if (mask) mask->assign(input.size(), 1.0);
    return input;
  }
  const double scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor out = input;
  if (mask) mask->resize(input.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double keep = unit(rng) < rate ? 0.0 : scale;
    out[i] *= keep;
    if (mask) (*mask)[i] = keep;
  }
  return out;
}

Dropout::Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  LayerSpec::dropout(rate).validate();
}

Tensor Dropout::forward(const Tensor& input, bool training) {
  has_mask_ = true;
  return dropout_apply(input, rate_, rng_, training, &mask_);
}

Tensor Dropout::backward(const Tensor& grad_output) {
  if (!has_mask_) throw UsageError("dropout backward called without a cached forward pass");
  if (grad_output.size() != mask_.size()) throw InputError("dropout grad_output size mismatch");
  Tensor g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask_[i];
  return g;
}

std::unique_ptr<Layer> make_layer(const LayerSpec& requested, const Shape& input, Rng& rng) {
  // A zero in_features means "take it from the incoming shape".
  LayerSpec spec = requested;
  if (spec.in_features == 0 && spec.kind == LayerKind::fully_connected) spec.in_features = shape_size(input);
  if (spec.in_features == 0 && spec.kind == LayerKind::lstm_cell && input.size() == 2) spec.in_features = input[1];
  spec.validate();
  switch (spec.kind) {
    case LayerKind::conv2d: {
      if (input.size() != 3) throw InputError("conv layer needs an [H,W,C] input, got " + shape_string(input));
      auto layer = std::make_unique<Conv2d>(spec.kernel_h, spec.kernel_w, input[2], spec.filters);
      layer->initialize(rng);
      return layer;
    }
    case LayerKind::fully_connected: {
      const std::size_t n = shape_size(input);
      if (spec.in_features != 0 && spec.in_features != n)
        throw InputError("fully connected layer declared " + std::to_string(spec.in_features) +
                         " inputs but receives " + shape_string(input));
      auto layer = std::make_unique<FullyConnected>(n, spec.out_features);
      layer->initialize(rng);
      return layer;
    }
    case LayerKind::lstm_cell: {
      if (input.size() != 2) throw InputError("lstm layer needs a [T,F] input, got " + shape_string(input));
      auto layer = std::make_unique<Lstm>(input[1], spec.hidden_size);
      layer->initialize(rng);
      return layer;
    }
    case LayerKind::relu:
      return std::make_unique<Relu>();
    case LayerKind::dropout:
      return std::make_unique<Dropout>(spec.rate, rng());
  }
  throw ConfigError("unknown layer kind");
}

}  // namespace csiloc::nn
