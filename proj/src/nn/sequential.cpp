#include "csiloc/nn/sequential.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "csiloc/error.hpp"
#include "csiloc/nn/lstm.hpp"

namespace csiloc::nn {

Sequential Sequential::build(const std::vector<LayerSpec>& specs, const Shape& input, Rng& rng) {
  Sequential seq;
  Shape shape = input;
  for (const auto& spec : specs) {
    auto layer = make_layer(spec, shape, rng);
    shape = layer->output_shape(shape);
    seq.add(std::move(layer));
  }
  return seq;
}

Sequential Sequential::from_checkpoint(const std::vector<CheckpointLayer>& layers, std::uint64_t dropout_seed) {
  Sequential seq;
  std::uint64_t dropout_index = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    auto need = [&](std::size_t n) {
      if (l.tensors.size() != n)
        throw DataError(std::string("checkpoint layer ") + std::to_string(i) + " (" + layer_kind_name(l.kind) +
                        ") expects " + std::to_string(n) + " tensors, found " + std::to_string(l.tensors.size()));
    };
    switch (l.kind) {
      case LayerKind::conv2d:
        need(2);
        seq.add(std::make_unique<Conv2d>(l.tensors[0], l.tensors[1]));
        break;
      case LayerKind::fully_connected:
        need(2);
        seq.add(std::make_unique<FullyConnected>(l.tensors[0], l.tensors[1]));
        break;
      case LayerKind::lstm_cell: {
        need(3);
        LstmParams p;
        p.input_weights = l.tensors[0];
        p.recurrent_weights = l.tensors[1];
        p.bias = l.tensors[2];
        seq.add(std::make_unique<Lstm>(std::move(p)));
        break;
      }
      case LayerKind::relu:
        need(0);
        seq.add(std::make_unique<Relu>());
        break;
      case LayerKind::dropout:
        need(1);
        if (l.tensors[0].size() != 1) throw DataError("checkpoint dropout rate must be a single value");
        seq.add(std::make_unique<Dropout>(l.tensors[0][0], derive_seed(dropout_seed, {dropout_index++})));
        break;
    }
  }
  return seq;
}

Tensor Sequential::forward(const Tensor& input, bool training) {
  Tensor x = input;
  for (auto& layer : layers_) x = layer->forward(x, training);
  return x;
}

Tensor Sequential::infer(const Tensor& input, std::size_t end) const {
  Tensor x = input;
  const std::size_t stop = std::min(end, layers_.size());
  for (std::size_t i = 0; i < stop; ++i) x = layers_[i]->infer(x);
  return x;
}

Tensor Sequential::backward(const Tensor& grad_output) {
  Tensor g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Tensor*> Sequential::parameters() {
  std::vector<Tensor*> params;
  for (auto& layer : layers_)
    for (auto* p : layer->parameters()) params.push_back(p);
  return params;
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_)
    for (const auto* p : std::as_const(*layer).parameters()) n += p->size();
  return n;
}

void Sequential::zero_grad() {
  for (auto* p : parameters()) {
    p->ensure_grad();
    p->zero_grad();
  }
}

std::vector<Shape> Sequential::trace_shapes(const Shape& input) const {
  std::vector<Shape> shapes;
  Shape s = input;
  for (const auto& layer : layers_) {
    s = layer->output_shape(s);
    shapes.push_back(s);
  }
  return shapes;
}

std::vector<CheckpointLayer> Sequential::to_checkpoint() const {
  std::vector<CheckpointLayer> out;
  for (const auto& layer : layers_) {
    CheckpointLayer l{layer->kind(), {}};
    if (layer->kind() == LayerKind::dropout) {
      l.tensors.emplace_back(Shape{1}, std::vector<double>{static_cast<const Dropout&>(*layer).rate()});
    } else {
      for (const auto* p : std::as_const(*layer).parameters()) l.tensors.push_back(Tensor(p->dims(), std::vector<double>(p->values().begin(), p->values().end())));
    }
    out.push_back(std::move(l));
  }
  return out;
}

Sequential Sequential::clone() const { return from_checkpoint(to_checkpoint()); }

}  // namespace csiloc::nn
