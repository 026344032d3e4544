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

// Optimizer kernels shared by attacks and training: Adam, the warm-up +
// cosine learning-rate schedule, the spherical latent step, and exact
// Euclidean projection onto an l1 ball.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <limits>
#include <vector>

#include "glens/core/error.hpp"
#include "glens/core/rng.hpp"
#include "glens/core/tensor.hpp"

namespace glens {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m;
  Tensor v;
  std::size_t t = 0;
};

// One bias-corrected Adam update of `param` in place.
inline void adam_step(AdamState& state, Tensor& param, const Tensor& grad, double lr, const AdamParams& hp = {}) {
  check_same_shape(param, grad, "adam_step");
  if (state.m.shape() != param.shape()) {
    state.m = Tensor::zeros_like(param);
    state.v = Tensor::zeros_like(param);
    state.t = 0;
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    const double v = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    state.m[i] = static_cast<Real>(m);
    state.v[i] = static_cast<Real>(v);
    param[i] = static_cast<Real>(param[i] - lr * (m / c1) / (std::sqrt(v / c2) + hp.eps));
  }
}

// Adam over a list of tensors (model parameters).
class Adam {
 public:
  explicit Adam(double lr, AdamParams hp = {}) : lr_(lr), hp_(hp) {}

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    if (states_.size() != params.size()) states_.assign(params.size(), AdamState{});
    for (std::size_t i = 0; i < params.size(); ++i) adam_step(states_[i], params[i], grads[i], lr_, hp_);
  }

  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_;
  AdamParams hp_;
  std::vector<AdamState> states_;
};

struct ScheduleParams {
  double base_lr = 0.1;
  double warmup_frac = 1.0 / 20.0;
  double decay_start_frac = 1.0 / 4.0;
};

// Linear warm-up from 0 over the first warmup_frac * total steps, constant
// until decay_start_frac * total, then cosine decay to 0 at `total`.
inline double lr_schedule(std::size_t step, std::size_t total, const ScheduleParams& p = {}) {
  if (total == 0) return 0.0;
  const double t = static_cast<double>(step);
  const double n = static_cast<double>(total);
  const double warmup = p.warmup_frac * n;
  const double decay_start = p.decay_start_frac * n;
  double lr = p.base_lr;
  if (t < warmup) lr = p.base_lr * t / warmup;
  if (t > decay_start && n > decay_start) {
    const double progress = std::min(1.0, (t - decay_start) / (n - decay_start));
    lr = std::min(lr, p.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
  }
  return lr;
}

// Rescales every row of a [B, k] latent batch to l2 norm sqrt(k). Rows that
// are exactly zero are redrawn from `rng`.
inline void project_to_sphere(Tensor& z, Rng& rng) {
  require(z.rank() == 2, ErrorKind::kShapeMismatch, "latent batch must be [B, k], got " + shape_str(z.shape()));
  const std::size_t rows = z.dim(0), k = z.dim(1);
  const double radius = std::sqrt(static_cast<double>(k));
  for (std::size_t r = 0; r < rows; ++r) {
    Real* row = z.data() + r * k;
    double norm2 = 0;
    for (std::size_t j = 0; j < k; ++j) norm2 += static_cast<double>(row[j]) * row[j];
    if (norm2 == 0) {
      for (std::size_t j = 0; j < k; ++j) row[j] = static_cast<Real>(rng.normal());
      norm2 = 0;
      for (std::size_t j = 0; j < k; ++j) norm2 += static_cast<double>(row[j]) * row[j];
    }
    const double s = radius / std::sqrt(norm2);
    for (std::size_t j = 0; j < k; ++j) row[j] = static_cast<Real>(row[j] * s);
  }
}

// Gradient step followed by per-sample renormalization onto the sqrt(k)
// sphere.
inline Tensor spherical_step(const Tensor& z, const Tensor& grad, double lr, Rng& rng) {
  check_same_shape(z, grad, "spherical_step");
  Tensor out = z;
  axpy(static_cast<Real>(-lr), grad, out);
  project_to_sphere(out, rng);
  return out;
}

// Adam update whose iterate is renormalized onto the sphere after every step.
class SphericalAdam {
 public:
  SphericalAdam(Rng rng, AdamParams hp = {}) : rng_(rng), hp_(hp) {}

  void step(Tensor& z, const Tensor& grad, double lr) {
    adam_step(state_, z, grad, lr, hp_);
    project_to_sphere(z, rng_);
  }

 private:
  Rng rng_;
  AdamParams hp_;
  AdamState state_;
};

// Euclidean projection of v onto {u : ||u - center||_1 <= radius} by the
// sort-based soft-threshold rule. The float result is guaranteed to satisfy
// the constraint when measured exactly on the stored values.
inline Tensor project_l1_ball(const Tensor& v, const Tensor& center, double radius) {
  check_same_shape(center, v, "project_l1_ball");
  require(radius > 0, ErrorKind::kInvalidArgument, "l1 radius must be positive");
  const std::size_t n = v.size();
  std::vector<double> mag(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mag[i] = std::abs(static_cast<double>(v[i]) - center[i]);
    total += mag[i];
  }
  if (total <= radius) return v;

  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double prefix = 0, theta = 0;
  for (std::size_t j = 0; j < n; ++j) {
    prefix += sorted[j];
    const double candidate = (prefix - radius) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0) theta = candidate;
  }

  double scale_ref = radius;
  for (std::size_t i = 0; i < n; ++i) scale_ref = std::max(scale_ref, std::abs(static_cast<double>(center[i])));
  double nudge = scale_ref * std::numeric_limits<Real>::epsilon();
  Tensor out(v.shape());
  for (int attempt = 0; attempt < 64; ++attempt) {
    double measured = 0;
    std::size_t support = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double shrunk = std::max(mag[i] - theta, 0.0);
      const double d = static_cast<double>(v[i]) - center[i];
      out[i] = static_cast<Real>(center[i] + (d < 0 ? -shrunk : shrunk));
      measured += std::abs(static_cast<double>(out[i]) - center[i]);
      support += shrunk > 0;
    }
    if (measured <= radius || support == 0) return out;
    // Rounding to float pushed the point outside; tighten the threshold.
    theta += std::max((measured - radius) / static_cast<double>(support), nudge);
    nudge *= 2;
  }
  return center;
}

}  // namespace glens
