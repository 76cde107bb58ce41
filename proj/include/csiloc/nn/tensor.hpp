#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace csiloc::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using Shape = std::vector<std::size_t>;
// Eigen picks its vectorised loop split from the buffer address. Aligned storage
// keeps that split, and so the rounding, identical from one run to the next.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

std::size_t shape_size(const Shape& dims);
std::string shape_string(const Shape& dims);

/// Dense row-major array of doubles with an optional gradient buffer of equal length.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, double fill = 0.0);
  Tensor(Shape dims, std::vector<double> data);

  const Shape& dims() const { return dims_; }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  Buffer& values() { return data_; }
  const Buffer& values() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool has_grad() const { return !grad_.empty(); }
  /// Allocates a zeroed gradient buffer if absent.
  void ensure_grad();
  void zero_grad();
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }

  /// Same data, new dims; the element count must not change.
  void reshape(Shape dims);
  Tensor reshaped(Shape dims) const;

  /// Views the buffer as rows x cols (row-major); rows*cols must equal size().
  MatrixMap matrix(std::size_t rows, std::size_t cols);
  ConstMatrixMap matrix(std::size_t rows, std::size_t cols) const;
  MatrixMap grad_matrix(std::size_t rows, std::size_t cols);

  bool all_finite() const;

 private:
  Shape dims_;
  Buffer data_;
  Buffer grad_;
};

/// Throws InputError with `what` unless the tensor has exactly the expected dims.
void require_shape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace csiloc::nn
