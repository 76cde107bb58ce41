#include "csiloc/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "csiloc/error.hpp"

namespace csiloc::nn {

std::size_t shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s.empty() ? "scalar" : s;
}

Tensor::Tensor(Shape dims, double fill) : dims_(std::move(dims)) {
  for (auto d : dims_)
    if (d == 0) throw InputError("tensor dims must be positive: " + shape_string(dims_));
  data_.assign(shape_size(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<double> data) : dims_(std::move(dims)), data_(data.begin(), data.end()) {
  for (auto d : dims_)
    if (d == 0) throw InputError("tensor dims must be positive: " + shape_string(dims_));
  if (shape_size(dims_) != data_.size())
    throw InputError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                     shape_string(dims_));
}

void Tensor::ensure_grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

void Tensor::reshape(Shape dims) {
  if (shape_size(dims) != data_.size())
    throw InputError("cannot reshape " + shape_string(dims_) + " to " + shape_string(dims));
  dims_ = std::move(dims);
}

Tensor Tensor::reshaped(Shape dims) const {
  Tensor t = *this;
  t.reshape(std::move(dims));
  return t;
}

MatrixMap Tensor::matrix(std::size_t rows, std::size_t cols) {
  if (rows * cols != data_.size()) throw InputError("matrix view does not cover tensor");
  return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatrixMap Tensor::matrix(std::size_t rows, std::size_t cols) const {
  if (rows * cols != data_.size()) throw InputError("matrix view does not cover tensor");
  return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatrixMap Tensor::grad_matrix(std::size_t rows, std::size_t cols) {
  ensure_grad();
  if (rows * cols != grad_.size()) throw InputError("matrix view does not cover gradient");
  return MatrixMap(grad_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

bool Tensor::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(data_.begin(), data_.end(), finite) && std::all_of(grad_.begin(), grad_.end(), finite);
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.dims() != expected)
    throw InputError(std::string(what) + ": expected " + shape_string(expected) + ", got " +
                     shape_string(t.dims()));
}

}  // namespace csiloc::nn
