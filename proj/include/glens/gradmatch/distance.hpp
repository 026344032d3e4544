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

#include <cmath>
#include <string>

#include "glens/core/error.hpp"
#include "glens/core/log.hpp"
#include "glens/core/types.hpp"

namespace glens {

enum class Distance { kNegCosine, kL2 };

inline std::string to_string(Distance d) { return d == Distance::kNegCosine ? "neg-cosine" : "l2"; }

inline Distance parse_distance(const std::string& s) {
  if (s == "neg-cosine") return Distance::kNegCosine;
  if (s == "l2") return Distance::kL2;
  fail(ErrorKind::kConfig, "unknown distance '" + s + "' (expected neg-cosine or l2)");
}

struct DistanceOptions {
  Distance metric = Distance::kNegCosine;
  // Average the cosine distance over leaves instead of treating all leaves
  // as one flattened vector.
  bool per_layer = false;
};

struct DistanceValue {
  double value = 0;
  GradientSet grad;  // d value / d a (only filled when requested)
};

namespace detail {

// Cosine distance between a and b restricted to leaves [first, last), with
// its gradient w.r.t. a written (scaled by `weight`) into grad.
inline double cosine_block(const GradientSet& a, const GradientSet& b, std::size_t first, std::size_t last,
                           GradientSet* grad, double weight) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = first; i < last; ++i) {
    ab += dot(a[i].value, b[i].value);
    aa += squared_norm(a[i].value);
    bb += squared_norm(b[i].value);
  }
  if (aa == 0 || bb == 0) {
    log_warning("cosine distance with a zero-norm gradient; using distance 1");
    return 1.0;
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  const double cos = ab / (na * nb);
  if (grad) {
    const double cb = -weight / (na * nb), ca = weight * ab / (aa * na * nb);
    for (std::size_t i = first; i < last; ++i) {
      Tensor& g = (*grad)[i].value;
      const Tensor &av = a[i].value, &bv = b[i].value;
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += static_cast<Real>(cb * bv[j] + ca * av[j]);
    }
  }
  return 1.0 - cos;
}

}  // namespace detail

// D(a, b). neg-cosine is 1 - <a,b>/(|a||b|) over all leaves flattened
// together (or averaged per leaf); l2 is the squared Euclidean distance.
inline DistanceValue grad_distance_with_grad(const GradientSet& a, const GradientSet& b, const DistanceOptions& opt,
                                             bool want_grad = true) {
  a.check_layout(b, "grad_distance");
  DistanceValue out;
  if (want_grad) out.grad = GradientSet::zeros_like(a);
  GradientSet* g = want_grad ? &out.grad : nullptr;
  if (opt.metric == Distance::kL2) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const Tensor &av = a[i].value, &bv = b[i].value;
      for (std::size_t j = 0; j < av.size(); ++j) {
        const double d = static_cast<double>(av[j]) - bv[j];
        out.value += d * d;
        if (g) (*g)[i].value[j] = static_cast<Real>(2 * d);
      }
    }
    return out;
  }
  if (!opt.per_layer) {
    out.value = detail::cosine_block(a, b, 0, a.size(), g, 1.0);
    return out;
  }
  const double w = a.size() ? 1.0 / static_cast<double>(a.size()) : 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) out.value += w * detail::cosine_block(a, b, i, i + 1, g, w);
  return out;
}

inline double grad_distance(const GradientSet& a, const GradientSet& b, const DistanceOptions& opt) {
  return grad_distance_with_grad(a, b, opt, false).value;
}

inline double grad_distance(const GradientSet& a, const GradientSet& b, Distance metric) {
  return grad_distance(a, b, DistanceOptions{metric, false});
}

struct FidelityValue {
  double value = 0;
  double tv = 0;
  double l2 = 0;
  Tensor grad;
};

// alpha_l2 * |x|^2 + alpha_tv * TV(x), with anisotropic TV summed over
// horizontal and vertical forward differences of every channel.
inline FidelityValue fidelity_reg_with_grad(const Tensor& x, double alpha_tv, double alpha_l2, bool want_grad = true) {
  require(x.rank() == 4, ErrorKind::kShapeMismatch, "fidelity_reg expects [B, C, H, W], got " + shape_str(x.shape()));
  require(alpha_tv >= 0 && alpha_l2 >= 0, ErrorKind::kInvalidArgument, "regularizer weights must be non-negative");
  FidelityValue f;
  if (want_grad) f.grad = Tensor(x.shape());
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  auto sign = [](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); };
  for (std::size_t p = 0; p < planes; ++p) {
    const Real* img = x.data() + p * h * w;
    Real* gi = want_grad ? f.grad.data() + p * h * w : nullptr;
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t k = r * w + c;
        const double v = img[k];
        f.l2 += v * v;
        if (gi) gi[k] += static_cast<Real>(2 * alpha_l2 * v);
        if (c + 1 < w) {
          const double d = static_cast<double>(img[k + 1]) - v;
          f.tv += std::abs(d);
          if (gi) {
            gi[k + 1] += static_cast<Real>(alpha_tv * sign(d));
            gi[k] -= static_cast<Real>(alpha_tv * sign(d));
          }
        }
        if (r + 1 < h) {
          const double d = static_cast<double>(img[k + w]) - v;
          f.tv += std::abs(d);
          if (gi) {
            gi[k + w] += static_cast<Real>(alpha_tv * sign(d));
            gi[k] -= static_cast<Real>(alpha_tv * sign(d));
          }
        }
      }
  }
  f.value = alpha_l2 * f.l2 + alpha_tv * f.tv;
  return f;
}

inline double fidelity_reg(const Tensor& x, double alpha_tv, double alpha_l2) {
  return fidelity_reg_with_grad(x, alpha_tv, alpha_l2, false).value;
}

inline double fidelity_reg(const ImageBatch& x, double alpha_tv, double alpha_l2) {
  return fidelity_reg(x.pixels, alpha_tv, alpha_l2);
}

}  // namespace glens
