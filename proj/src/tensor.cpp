#include "rrauq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "rrauq/errors.hpp"

namespace rrauq {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) {
      throw DimensionError("tensor dimensions must be positive, got " +
                           shape_to_string(shape));
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> data;
  std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& row : rows) {
    if (row.size() != cols) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(shape_));
  }
  return shape_[axis];
}

double& Tensor::at(std::size_t row, std::size_t col) {
  return data_[row * shape_[1] + col];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return data_[row * shape_[1] + col];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " +
                         shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (shape_.empty() || begin >= end || end > shape_[0]) {
    throw DimensionError("invalid row slice [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") of " +
                         shape_to_string(shape_));
  }
  const std::size_t stride = data_.size() / shape_[0];
  Shape out_shape = shape_;
  out_shape[0] = end - begin;
  return Tensor(std::move(out_shape),
                std::vector<double>(data_.begin() + begin * stride,
                                    data_.begin() + end * stride));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> rows) const {
  if (shape_.empty() || rows.empty()) {
    throw DimensionError("gather_rows needs a non-empty row list");
  }
  const std::size_t stride = data_.size() / shape_[0];
  std::vector<double> out;
  out.reserve(rows.size() * stride);
  for (auto r : rows) {
    if (r >= shape_[0]) throw DimensionError("gather_rows index out of range");
    out.insert(out.end(), data_.begin() + r * stride,
               data_.begin() + (r + 1) * stride);
  }
  Shape out_shape = shape_;
  out_shape[0] = rows.size();
  return Tensor(std::move(out_shape), std::move(out));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " +
                         shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = x[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) o[i * n + j] += aip * y[p * n + j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose needs a matrix");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor elementwise(UnaryOp op, const Tensor& a) {
  Tensor out = a;
  for (auto& v : out.data()) {
    switch (op) {
      case UnaryOp::neg: v = -v; break;
      case UnaryOp::abs: v = std::fabs(v); break;
      case UnaryOp::exp: v = std::exp(v); break;
      case UnaryOp::log: v = std::log(v); break;
      case UnaryOp::square: v = v * v; break;
      case UnaryOp::sqrt: v = std::sqrt(v); break;
      case UnaryOp::relu: v = v >= 0.0 ? v : 0.0; break;
    }
  }
  return out;
}

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise");
  Tensor out = a;
  auto o = out.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    switch (op) {
      case BinaryOp::add: o[i] += y[i]; break;
      case BinaryOp::sub: o[i] -= y[i]; break;
      case BinaryOp::mul: o[i] *= y[i]; break;
      case BinaryOp::div: o[i] /= y[i]; break;
      case BinaryOp::max: o[i] = std::max(o[i], y[i]); break;
      case BinaryOp::min: o[i] = std::min(o[i], y[i]); break;
    }
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out = a;
  for (auto& v : out.data()) v *= factor;
  return out;
}

Tensor reduce(const Tensor& a, ReduceKind kind, std::size_t axis) {
  if (axis >= a.rank()) {
    throw DimensionError("reduce: axis " + std::to_string(axis) +
                         " invalid for " + shape_to_string(a.shape()));
  }
  const auto& shape = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];

  Shape out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out_shape.push_back(shape[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  Tensor out(out_shape);
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double acc = src[base];
      std::size_t best = 0;
      if (kind == ReduceKind::sum || kind == ReduceKind::mean) {
        acc = 0.0;
        for (std::size_t k = 0; k < len; ++k) acc += src[base + k * inner];
        if (kind == ReduceKind::mean) acc /= static_cast<double>(len);
      } else {
        for (std::size_t k = 1; k < len; ++k) {
          const double v = src[base + k * inner];
          if (v > acc) {
            acc = v;
            best = k;
          }
        }
        if (kind == ReduceKind::argmax) acc = static_cast<double>(best);
      }
      dst[o * inner + in] = acc;
    }
  }
  return out;
}

double reduce_all(const Tensor& a, ReduceKind kind) {
  return reduce(a.reshaped({a.size()}), kind, 0)[0];
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("softmax_rows needs a matrix");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    double top = logits.at(r, 0);
    for (std::size_t c = 1; c < cols; ++c) top = std::max(top, logits.at(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = std::exp(logits.at(r, c) - top);
      out.at(r, c) = e;
      total += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= total;
  }
  return out;
}

}  // namespace rrauq
