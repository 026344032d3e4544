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

// Differentiable layers. A layer owns no parameters: it receives them as a
// span, so models can be copied and averaged as plain tensor lists.
//
// Besides the usual forward/backward pair, layers used inside classifiers
// implement a forward-mode tangent of both passes. Pushing a parameter
// direction v through forward and backward yields d/de grad_x loss(x, p + e v),
// which equals grad_x <v, grad_p loss(x, p)>: the input gradient of any
// objective defined on parameter gradients.

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glens/core/error.hpp"
#include "glens/core/rng.hpp"
#include "glens/core/tensor.hpp"

namespace glens {

using ParamView = std::span<const Tensor>;
using GradView = std::span<Tensor>;

struct ParamSpec {
  std::string name;
  Shape shape;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual std::vector<ParamSpec> param_specs() const { return {}; }
  virtual void init_params(GradView /*params*/, Rng& /*rng*/) const {}

  virtual Tensor forward(const Tensor& in, ParamView params) const = 0;

  // Returns the input gradient (unless `need_input_grad` is false, in which
  // case an empty tensor) and accumulates parameter gradients into `grads`
  // when it is non-empty.
  virtual Tensor backward(const Tensor& in, const Tensor& out, const Tensor& grad_out, ParamView params,
                          GradView grads, bool need_input_grad) const = 0;

  // Tangent of forward(). Empty tensors stand for zero tangents.
  virtual Tensor forward_tangent(const Tensor& /*in*/, const Tensor& /*in_dot*/, ParamView /*params*/,
                                 ParamView /*params_dot*/) const {
    fail(ErrorKind::kInvalidArgument, kind() + " has no tangent pass");
  }

  // Tangent of the input gradient returned by backward().
  virtual Tensor backward_tangent(const Tensor& /*in*/, const Tensor& /*in_dot*/, const Tensor& /*grad_out*/,
                                  const Tensor& /*grad_out_dot*/, ParamView /*params*/,
                                  ParamView /*params_dot*/) const {
    fail(ErrorKind::kInvalidArgument, kind() + " has no tangent pass");
  }

  // True when the layer is piecewise linear in its input, so the tangent of
  // its backward pass does not depend on the input tangent.
  virtual bool piecewise_linear() const { return true; }
};

using LayerPtr = std::shared_ptr<const Layer>;

namespace detail {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline ConstMatMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline MatMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) scaled by `gain`.
inline void fill_fan_in_uniform(Tensor& t, std::size_t fan_in, Rng& rng, double gain = 1.0) {
  const double bound = gain / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values()) v = static_cast<Real>(rng.uniform(-bound, bound));
}

inline bool present(ParamView p) { return !p.empty() && !p[0].empty(); }

}  // namespace detail

// 2-D convolution with square kernels, zero padding, and bias.
class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
         std::size_t padding = 0)
      : cin_(in_channels), cout_(out_channels), k_(kernel), stride_(stride), pad_(padding) {}

  std::string kind() const override { return "conv2d"; }

  Shape output_shape(const Shape& in) const override {
    require(in.size() == 4 && in[1] == cin_, ErrorKind::kShapeMismatch,
            "conv2d expects [B, " + std::to_string(cin_) + ", H, W], got " + shape_str(in));
    require(in[2] + 2 * pad_ >= k_ && in[3] + 2 * pad_ >= k_, ErrorKind::kShapeMismatch,
            "conv2d input " + shape_str(in) + " smaller than kernel");
    return {in[0], cout_, (in[2] + 2 * pad_ - k_) / stride_ + 1, (in[3] + 2 * pad_ - k_) / stride_ + 1};
  }

  std::vector<ParamSpec> param_specs() const override {
    return {{"weight", {cout_, cin_, k_, k_}}, {"bias", {cout_}}};
  }

  void init_params(GradView params, Rng& rng) const override {
    detail::fill_fan_in_uniform(params[0], cin_ * k_ * k_, rng);
    detail::fill_fan_in_uniform(params[1], cin_ * k_ * k_, rng);
  }

  Tensor forward(const Tensor& in, ParamView params) const override {
    const Shape out_shape = output_shape(in.shape());
    Tensor out(out_shape);
    const Geometry g = geometry(in.shape());
    Tensor cols({g.patch, g.pixels});
    const auto weight = detail::as_matrix(params[0], cout_, g.patch);
    for (std::size_t b = 0; b < g.batch; ++b) {
      im2col(in, b, g, cols);
      auto y = detail::MatMap(out.data() + b * cout_ * g.pixels, cout_, g.pixels);
      y.noalias() = weight * detail::as_matrix(cols, g.patch, g.pixels);
      add_bias(y, params[1]);
    }
    return out;
  }

  Tensor backward(const Tensor& in, const Tensor& /*out*/, const Tensor& grad_out, ParamView params, GradView grads,
                  bool need_input_grad) const override {
    const Geometry g = geometry(in.shape());
    const auto weight = detail::as_matrix(params[0], cout_, g.patch);
    Tensor cols({g.patch, g.pixels});
    Tensor grad_in = need_input_grad ? Tensor(in.shape()) : Tensor();
    for (std::size_t b = 0; b < g.batch; ++b) {
      const auto dy = detail::ConstMatMap(grad_out.data() + b * cout_ * g.pixels, cout_, g.pixels);
      if (!grads.empty()) {
        im2col(in, b, g, cols);
        detail::as_matrix(grads[0], cout_, g.patch).noalias() += dy * detail::as_matrix(cols, g.patch, g.pixels).transpose();
        auto db = Eigen::Map<Eigen::VectorX<Real>>(grads[1].data(), cout_);
        db += dy.rowwise().sum();
      }
      if (need_input_grad) {
        detail::as_matrix(cols, g.patch, g.pixels).noalias() = weight.transpose() * dy;
        col2im(cols, b, g, grad_in);
      }
    }
    return grad_in;
  }

  Tensor forward_tangent(const Tensor& in, const Tensor& in_dot, ParamView params,
                         ParamView params_dot) const override {
    const Geometry g = geometry(in.shape());
    const bool has_in = !in_dot.empty();
    const bool has_p = detail::present(params_dot);
    if (!has_in && !has_p) return {};
    Tensor out(output_shape(in.shape()));
    Tensor cols({g.patch, g.pixels});
    for (std::size_t b = 0; b < g.batch; ++b) {
      auto y = detail::MatMap(out.data() + b * cout_ * g.pixels, cout_, g.pixels);
      y.setZero();
      if (has_p) {
        im2col(in, b, g, cols);
        y.noalias() += detail::as_matrix(params_dot[0], cout_, g.patch) * detail::as_matrix(cols, g.patch, g.pixels);
        add_bias(y, params_dot[1]);
      }
      if (has_in) {
        im2col(in_dot, b, g, cols);
        y.noalias() += detail::as_matrix(params[0], cout_, g.patch) * detail::as_matrix(cols, g.patch, g.pixels);
      }
    }
    return out;
  }

  Tensor backward_tangent(const Tensor& in, const Tensor& /*in_dot*/, const Tensor& grad_out,
                          const Tensor& grad_out_dot, ParamView params, ParamView params_dot) const override {
    const Geometry g = geometry(in.shape());
    const bool has_p = detail::present(params_dot);
    const bool has_dy = !grad_out_dot.empty();
    if (!has_p && !has_dy) return {};
    Tensor grad_in(in.shape());
    Tensor cols({g.patch, g.pixels});
    for (std::size_t b = 0; b < g.batch; ++b) {
      auto c = detail::as_matrix(cols, g.patch, g.pixels);
      c.setZero();
      if (has_p) {
        const auto dy = detail::ConstMatMap(grad_out.data() + b * cout_ * g.pixels, cout_, g.pixels);
        c.noalias() += detail::as_matrix(params_dot[0], cout_, g.patch).transpose() * dy;
      }
      if (has_dy) {
        const auto ddy = detail::ConstMatMap(grad_out_dot.data() + b * cout_ * g.pixels, cout_, g.pixels);
        c.noalias() += detail::as_matrix(params[0], cout_, g.patch).transpose() * ddy;
      }
      col2im(cols, b, g, grad_in);
    }
    return grad_in;
  }

 private:
  struct Geometry {
    std::size_t batch, height, width, out_h, out_w, patch, pixels;
  };

  Geometry geometry(const Shape& in) const {
    const Shape o = output_shape(in);
    return {in[0], in[2], in[3], o[2], o[3], cin_ * k_ * k_, o[2] * o[3]};
  }

  static void add_bias(detail::MatMap& y, const Tensor& bias) {
    for (Eigen::Index r = 0; r < y.rows(); ++r) y.row(r).array() += bias[static_cast<std::size_t>(r)];
  }

  void im2col(const Tensor& in, std::size_t b, const Geometry& g, Tensor& cols) const {
    const Real* src = in.data() + b * cin_ * g.height * g.width;
    Real* dst = cols.data();
    for (std::size_t c = 0; c < cin_; ++c)
      for (std::size_t ky = 0; ky < k_; ++ky)
        for (std::size_t kx = 0; kx < k_; ++kx) {
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(pad_);
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(pad_);
              const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                                  ix < static_cast<std::ptrdiff_t>(g.width);
              *dst++ = inside ? src[(c * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)]
                              : Real{0};
            }
          }
        }
  }

  // Accumulates columns back into image `b` of `out`.
  void col2im(const Tensor& cols, std::size_t b, const Geometry& g, Tensor& out) const {
    Real* dst = out.data() + b * cin_ * g.height * g.width;
    const Real* src = cols.data();
    for (std::size_t c = 0; c < cin_; ++c)
      for (std::size_t ky = 0; ky < k_; ++ky)
        for (std::size_t kx = 0; kx < k_; ++kx) {
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(pad_);
            for (std::size_t ox = 0; ox < g.out_w; ++ox, ++src) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(pad_);
              if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                  ix < static_cast<std::ptrdiff_t>(g.width))
                dst[(c * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)] += *src;
            }
          }
        }
  }

  std::size_t cin_, cout_, k_, stride_, pad_;
};

// Fully connected layer on [B, in] inputs: y = x W^T + b, W is [out, in].
class Linear final : public Layer {
 public:
  Linear(std::size_t in_features, std::size_t out_features, bool bias = true)
      : in_(in_features), out_(out_features), bias_(bias) {}

  std::string kind() const override { return "linear"; }

  Shape output_shape(const Shape& in) const override {
    require(in.size() == 2 && in[1] == in_, ErrorKind::kShapeMismatch,
            "linear expects [B, " + std::to_string(in_) + "], got " + shape_str(in));
    return {in[0], out_};
  }

  std::vector<ParamSpec> param_specs() const override {
    if (!bias_) return {{"weight", {out_, in_}}};
    return {{"weight", {out_, in_}}, {"bias", {out_}}};
  }

  void init_params(GradView params, Rng& rng) const override {
    for (auto& p : params) detail::fill_fan_in_uniform(p, in_, rng);
  }

  Tensor forward(const Tensor& in, ParamView params) const override {
    Tensor out(output_shape(in.shape()));
    const std::size_t batch = in.dim(0);
    auto y = detail::as_matrix(out, batch, out_);
    y.noalias() = detail::as_matrix(in, batch, in_) * detail::as_matrix(params[0], out_, in_).transpose();
    if (bias_) add_bias(y, params[1]);
    return out;
  }

  Tensor backward(const Tensor& in, const Tensor& /*out*/, const Tensor& grad_out, ParamView params, GradView grads,
                  bool need_input_grad) const override {
    const std::size_t batch = in.dim(0);
    const auto dy = detail::as_matrix(grad_out, batch, out_);
    if (!grads.empty()) {
      detail::as_matrix(grads[0], out_, in_).noalias() += dy.transpose() * detail::as_matrix(in, batch, in_);
      if (bias_) {
        auto db = Eigen::Map<Eigen::RowVectorX<Real>>(grads[1].data(), static_cast<Eigen::Index>(out_));
        db += dy.colwise().sum();
      }
    }
    if (!need_input_grad) return {};
    Tensor grad_in(in.shape());
    detail::as_matrix(grad_in, batch, in_).noalias() = dy * detail::as_matrix(params[0], out_, in_);
    return grad_in;
  }

  Tensor forward_tangent(const Tensor& in, const Tensor& in_dot, ParamView params,
                         ParamView params_dot) const override {
    const bool has_in = !in_dot.empty();
    const bool has_p = detail::present(params_dot);
    if (!has_in && !has_p) return {};
    const std::size_t batch = in.dim(0);
    Tensor out(output_shape(in.shape()));
    auto y = detail::as_matrix(out, batch, out_);
    if (has_p) {
      y.noalias() += detail::as_matrix(in, batch, in_) * detail::as_matrix(params_dot[0], out_, in_).transpose();
      if (bias_) add_bias(y, params_dot[1]);
    }
    if (has_in)
      y.noalias() += detail::as_matrix(in_dot, batch, in_) * detail::as_matrix(params[0], out_, in_).transpose();
    return out;
  }

  Tensor backward_tangent(const Tensor& in, const Tensor& /*in_dot*/, const Tensor& grad_out,
                          const Tensor& grad_out_dot, ParamView params, ParamView params_dot) const override {
    const bool has_p = detail::present(params_dot);
    const bool has_dy = !grad_out_dot.empty();
    if (!has_p && !has_dy) return {};
    const std::size_t batch = in.dim(0);
    Tensor grad_in(in.shape());
    auto dx = detail::as_matrix(grad_in, batch, in_);
    if (has_p)
      dx.noalias() += detail::as_matrix(grad_out, batch, out_) * detail::as_matrix(params_dot[0], out_, in_);
    if (has_dy)
      dx.noalias() += detail::as_matrix(grad_out_dot, batch, out_) * detail::as_matrix(params[0], out_, in_);
    return grad_in;
  }

 private:
  static void add_bias(detail::MatMap& y, const Tensor& bias) {
    y.rowwise() += Eigen::Map<const Eigen::RowVectorX<Real>>(bias.data(), y.cols());
  }

  std::size_t in_, out_;
  bool bias_;
};

// max(x, slope * x); slope 0 gives ReLU.
class LeakyRelu final : public Layer {
 public:
  explicit LeakyRelu(Real slope = 0) : slope_(slope) {}

  std::string kind() const override { return slope_ == 0 ? "relu" : "leaky_relu"; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor forward(const Tensor& in, ParamView) const override {
    Tensor out = in;
    for (auto& v : out.values())
      if (v <= 0) v *= slope_;
    return out;
  }

  Tensor backward(const Tensor& in, const Tensor&, const Tensor& grad_out, ParamView, GradView,
                  bool need_input_grad) const override {
    if (!need_input_grad) return {};
    return masked(in, grad_out);
  }

  Tensor forward_tangent(const Tensor& in, const Tensor& in_dot, ParamView, ParamView) const override {
    if (in_dot.empty()) return {};
    return masked(in, in_dot);
  }

  Tensor backward_tangent(const Tensor& in, const Tensor&, const Tensor&, const Tensor& grad_out_dot, ParamView,
                          ParamView) const override {
    if (grad_out_dot.empty()) return {};
    return masked(in, grad_out_dot);
  }

 private:
  Tensor masked(const Tensor& in, const Tensor& signal) const {
    Tensor out = signal;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (in[i] <= 0) out[i] *= slope_;
    return out;
  }

  Real slope_;
};

inline LayerPtr relu() { return std::make_shared<LeakyRelu>(0); }

// Reshapes the per-sample part of a batch: [B, ...] -> [B, target...].
class Reshape final : public Layer {
 public:
  explicit Reshape(Shape target) : target_(std::move(target)) {}

  std::string kind() const override { return "reshape"; }

  Shape output_shape(const Shape& in) const override {
    require(!in.empty() && shape_size(in) == in[0] * shape_size(target_), ErrorKind::kShapeMismatch,
            "cannot reshape " + shape_str(in) + " to per-sample " + shape_str(target_));
    Shape out = target_;
    out.insert(out.begin(), in[0]);
    return out;
  }

  Tensor forward(const Tensor& in, ParamView) const override { return in.reshaped(output_shape(in.shape())); }

  Tensor backward(const Tensor& in, const Tensor&, const Tensor& grad_out, ParamView, GradView,
                  bool need_input_grad) const override {
    if (!need_input_grad) return {};
    return grad_out.reshaped(in.shape());
  }

  Tensor forward_tangent(const Tensor& in, const Tensor& in_dot, ParamView, ParamView) const override {
    if (in_dot.empty()) return {};
    return in_dot.reshaped(output_shape(in.shape()));
  }

  Tensor backward_tangent(const Tensor& in, const Tensor&, const Tensor&, const Tensor& grad_out_dot, ParamView,
                          ParamView) const override {
    if (grad_out_dot.empty()) return {};
    return grad_out_dot.reshaped(in.shape());
  }

 private:
  Shape target_;
};

inline LayerPtr flatten(std::size_t features) { return std::make_shared<Reshape>(Shape{features}); }

// Nearest-neighbour 2x spatial upsampling.
class Upsample2x final : public Layer {
 public:
  std::string kind() const override { return "upsample2x"; }

  Shape output_shape(const Shape& in) const override {
    require(in.size() == 4, ErrorKind::kShapeMismatch, "upsample expects [B, C, H, W], got " + shape_str(in));
    return {in[0], in[1], in[2] * 2, in[3] * 2};
  }

  Tensor forward(const Tensor& in, ParamView) const override { return up(in); }

  Tensor backward(const Tensor& in, const Tensor&, const Tensor& grad_out, ParamView, GradView,
                  bool need_input_grad) const override {
    if (!need_input_grad) return {};
    Tensor grad_in(in.shape());
    const std::size_t planes = in.dim(0) * in.dim(1), h = in.dim(2), w = in.dim(3);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < 2 * h; ++y)
        for (std::size_t x = 0; x < 2 * w; ++x)
          grad_in[(p * h + y / 2) * w + x / 2] += grad_out[(p * 2 * h + y) * 2 * w + x];
    return grad_in;
  }

  Tensor forward_tangent(const Tensor&, const Tensor& in_dot, ParamView, ParamView) const override {
    if (in_dot.empty()) return {};
    return up(in_dot);
  }

 private:
  Tensor up(const Tensor& in) const {
    Tensor out(output_shape(in.shape()));
    const std::size_t planes = in.dim(0) * in.dim(1), h = in.dim(2), w = in.dim(3);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < 2 * h; ++y)
        for (std::size_t x = 0; x < 2 * w; ++x) out[(p * 2 * h + y) * 2 * w + x] = in[(p * h + y / 2) * w + x / 2];
    return out;
  }
};

// Logistic squashing onto (0, 1).
class Sigmoid final : public Layer {
 public:
  std::string kind() const override { return "sigmoid"; }
  Shape output_shape(const Shape& in) const override { return in; }
  bool piecewise_linear() const override { return false; }

  Tensor forward(const Tensor& in, ParamView) const override {
    Tensor out = in;
    for (auto& v : out.values()) v = static_cast<Real>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    return out;
  }

  Tensor backward(const Tensor&, const Tensor& out, const Tensor& grad_out, ParamView, GradView,
                  bool need_input_grad) const override {
    if (!need_input_grad) return {};
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] *= out[i] * (1 - out[i]);
    return grad_in;
  }
};

}  // namespace glens
