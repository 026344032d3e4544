/*
 * Copyright 2026 The Glens Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "glens/core/error.hpp"

namespace glens {

// Model math runs in 32-bit; reductions (dot, norms, metrics) accumulate in
// 64-bit.
using Real = float;
using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::string join_dims(const std::vector<std::size_t>& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  return os.str();
}

inline Shape parse_dims(const std::string& text) {
  Shape dims;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find('x', pos);
    const std::string part = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    require(!part.empty() && part.find_first_not_of("0123456789") == std::string::npos, ErrorKind::kInvalidArgument,
            "bad dimension list '" + text + "'");
    dims.push_back(std::stoul(part));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return dims;
}

// Dense n-dimensional array, row-major. A default-constructed tensor is
// "absent" (rank 0, no data) and is used as the zero tangent in
// forward-mode passes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<Real> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    require(shape_size(shape_) == data_.size(), ErrorKind::kShapeMismatch,
            "tensor shape " + shape_str(shape_) + " does not hold " +
                std::to_string(data_.size()) + " values");
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  // Reinterprets the data under a new shape with the same element count.
  Tensor reshaped(Shape shape) const {
    require(shape_size(shape) == data_.size(), ErrorKind::kShapeMismatch,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }
  void reshape(Shape shape) {
    require(shape_size(shape) == data_.size(), ErrorKind::kShapeMismatch,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    shape_ = std::move(shape);
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<Real> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* what) {
  require(a.shape() == b.shape(), ErrorKind::kShapeMismatch,
          std::string(what) + ": expected " + shape_str(a.shape()) + ", got " +
              shape_str(b.shape()));
}

// Element-wise helpers. All reductions accumulate in double.

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Tensor scale(const Tensor& a, Real s) {
  Tensor out = a;
  for (auto& v : out.values()) v *= s;
  return out;
}

// y += alpha * x
inline void axpy(Real alpha, const Tensor& x, Tensor& y) {
  check_same_shape(y, x, "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline void add_inplace(Tensor& y, const Tensor& x) { axpy(1, x, y); }

inline double dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

inline double squared_norm(const Tensor& a) {
  double acc = 0;
  for (Real v : a.values()) acc += static_cast<double>(v) * v;
  return acc;
}

inline double l2_norm(const Tensor& a) { return std::sqrt(squared_norm(a)); }

inline double l1_norm(const Tensor& a) {
  double acc = 0;
  for (Real v : a.values()) acc += std::abs(static_cast<double>(v));
  return acc;
}

inline double max_abs(const Tensor& a) {
  double m = 0;
  for (Real v : a.values()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

inline bool all_finite(const Tensor& a) {
  return std::all_of(a.values().begin(), a.values().end(),
                     [](Real v) { return std::isfinite(v); });
}

inline std::size_t count_zeros(const Tensor& a) {
  return static_cast<std::size_t>(std::count(a.values().begin(),
                                             a.values().end(), Real{0}));
}

inline void clamp_inplace(Tensor& a, Real lo, Real hi) {
  for (auto& v : a.values()) v = std::clamp(v, lo, hi);
}

// Slices sample `index` out of a batch-major tensor [B, ...].
inline Tensor batch_item(const Tensor& batch, std::size_t index) {
  require(batch.rank() >= 1 && index < batch.dim(0), ErrorKind::kOutOfRange,
          "batch index " + std::to_string(index) + " outside " +
              shape_str(batch.shape()));
  Shape item_shape(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t n = shape_size(item_shape);
  std::vector<Real> data(batch.data() + index * n,
                         batch.data() + (index + 1) * n);
  item_shape.insert(item_shape.begin(), 1);
  return Tensor(std::move(item_shape), std::move(data));
}

// Stacks equally-shaped [1, ...] or [...] items along a new leading axis.
inline Tensor gather_rows(const Tensor& batch,
                          std::span<const std::size_t> rows) {
  Shape item_shape(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t n = shape_size(item_shape);
  Shape out_shape = item_shape;
  out_shape.insert(out_shape.begin(), rows.size());
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < batch.dim(0), ErrorKind::kOutOfRange,
            "row " + std::to_string(rows[r]) + " outside batch of " +
                std::to_string(batch.dim(0)));
    std::copy_n(batch.data() + rows[r] * n, n, out.data() + r * n);
  }
  return out;
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.empty()) return b;
  require(a.rank() == b.rank() &&
              std::equal(a.shape().begin() + 1, a.shape().end(),
                         b.shape().begin() + 1),
          ErrorKind::kShapeMismatch,
          "concat_rows: " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<Real> data = a.storage();
  data.insert(data.end(), b.values().begin(), b.values().end());
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace glens
