#include "csiloc/nn/adam.hpp"

#include <algorithm>
#include <cmath>

#include "csiloc/error.hpp"

namespace csiloc::nn {

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size()) throw InputError("adam: parameter and gradient lengths differ");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw InputError("adam: moment lengths differ from the parameter vector");
  const auto& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g * g;
    params[i] -= h.learning_rate * (m / c1) / (std::sqrt(v / c2) + h.epsilon);
  }
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, AdamHyper hyper) : params_(std::move(params)) {
  states_.reserve(params_.size());
  for (auto* p : params_) {
    p->ensure_grad();
    states_.emplace_back(p->size(), hyper);
  }
}

void AdamOptimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    p->ensure_grad();
    adam_update(p->data(), p->grad(), states_[i]);
  }
}

void AdamOptimizer::zero_grad() {
  for (auto* p : params_) {
    p->ensure_grad();
    p->zero_grad();
  }
}

bool AdamOptimizer::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i]->all_finite()) return false;
    const auto& s = states_[i];
    if (!std::all_of(s.first_moment.begin(), s.first_moment.end(), finite)) return false;
    if (!std::all_of(s.second_moment.begin(), s.second_moment.end(), finite)) return false;
  }
  return true;
}

}  // namespace csiloc::nn
