#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rrauq {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles. The element count always equals the
/// product of the shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  /// 1-D tensor from a list of values.
  static Tensor vector(std::initializer_list<double> values);
  /// 2-D tensor from nested rows; rows must be of equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t row, std::size_t col);
  double at(std::size_t row, std::size_t col) const;

  /// Same data viewed under a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  /// Copy of rows [begin, end) along axis 0.
  Tensor slice_rows(std::size_t begin, std::size_t end) const;
  /// Rows gathered along axis 0 in the given order.
  Tensor gather_rows(std::span<const std::size_t> rows) const;

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

enum class UnaryOp { neg, abs, exp, log, square, sqrt, relu };
enum class BinaryOp { add, sub, mul, div, max, min };

Tensor elementwise(UnaryOp op, const Tensor& a);
Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);

enum class ReduceKind { sum, mean, max, argmax };

/// Reduction along one axis; the axis is removed from the result shape.
/// argmax returns indices as doubles and breaks ties toward the lowest index.
Tensor reduce(const Tensor& a, ReduceKind kind, std::size_t axis);
/// Reduction over all elements, returned as a scalar.
double reduce_all(const Tensor& a, ReduceKind kind);

/// Row-wise softmax of a [rows x cols] tensor through a max-shifted path.
Tensor softmax_rows(const Tensor& logits);

}  // namespace rrauq
