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
#include <string>
#include <vector>

#include "glens/core/error.hpp"
#include "glens/core/types.hpp"

namespace glens {

enum class TransformKind { kIdentity, kClip, kSparsify, kSoteria };

inline std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::kIdentity: return "identity";
    case TransformKind::kClip: return "clip";
    case TransformKind::kSparsify: return "sparsify";
    case TransformKind::kSoteria: return "soteria";
  }
  return "identity";
}

// The attacker's replica of the client's defense.
struct InferredTransform {
  TransformKind kind = TransformKind::kIdentity;
  std::vector<double> clip_bounds;  // one per leaf (clip)
  std::vector<Tensor> masks;        // one per leaf, 1 = kept; empty = untouched leaf
  std::string masked_leaf;          // soteria

  static InferredTransform identity() { return {}; }
};

struct InferenceOptions {
  double sparsity_threshold = 0.3;
  double clip_relative_tol = 1e-4;
  std::size_t min_binding_layers = 2;
  // An FC leaf whose zero fraction reaches this while some other leaf stays
  // at or below sparsity_threshold is read as a single-layer (Soteria) mask.
  double soteria_threshold = 0.75;
  std::string fc_leaf = "fc.weight";
};

namespace detail {

inline Tensor support_mask(const Tensor& t) {
  Tensor m(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) m[i] = t[i] != 0 ? 1 : 0;
  return m;
}

inline double zero_fraction(const Tensor& t) {
  return t.size() ? static_cast<double>(count_zeros(t)) / static_cast<double>(t.size()) : 0.0;
}

}  // namespace detail

// Reads the defense signature off a received gradient: a masked FC leaf next
// to dense leaves (Soteria), every leaf carrying a large share of exact zeros
// (layer-wise sparsification), or several leaves sharing the maximal norm
// (clipping). Zero fractions are taken per leaf because ReLU networks leave
// many exact zeros in undefended gradients, but never in every leaf: the
// final bias gradient is dense.
inline InferredTransform infer_transform(const GradientSet& g, const InferenceOptions& opt = {}) {
  InferredTransform t;
  if (g.empty()) return t;

  std::vector<double> zero_frac;
  for (const auto& e : g.entries()) zero_frac.push_back(detail::zero_fraction(e.value));
  const double min_zero = *std::min_element(zero_frac.begin(), zero_frac.end());

  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].name != opt.fc_leaf || zero_frac[i] < opt.soteria_threshold) continue;
    bool other_dense = false;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (j != i && zero_frac[j] <= opt.sparsity_threshold) other_dense = true;
    if (!other_dense) break;
    t.kind = TransformKind::kSoteria;
    t.masked_leaf = g[i].name;
    t.masks.resize(g.size());
    t.masks[i] = detail::support_mask(g[i].value);
    return t;
  }

  if (min_zero > opt.sparsity_threshold) {
    t.kind = TransformKind::kSparsify;
    for (const auto& e : g.entries()) t.masks.push_back(detail::support_mask(e.value));
    return t;
  }

  std::vector<double> norms;
  for (const auto& e : g.entries()) norms.push_back(l2_norm(e.value));
  const double max_norm = *std::max_element(norms.begin(), norms.end());
  if (max_norm > 0) {
    double sum = 0;
    std::size_t binding = 0;
    for (double n : norms)
      if (std::abs(n - max_norm) <= opt.clip_relative_tol * max_norm) {
        sum += n;
        ++binding;
      }
    if (binding >= opt.min_binding_layers) {
      t.kind = TransformKind::kClip;
      t.clip_bounds.assign(g.size(), sum / static_cast<double>(binding));
    }
  }
  return t;
}

namespace detail {

inline void check_transform(const InferredTransform& t, const GradientSet& g) {
  if (t.kind == TransformKind::kClip)
    require(t.clip_bounds.size() == g.size(), ErrorKind::kShapeMismatch, "clip bounds do not match gradient leaves");
  if (t.kind == TransformKind::kSparsify || t.kind == TransformKind::kSoteria) {
    require(t.masks.size() == g.size(), ErrorKind::kShapeMismatch, "masks do not match gradient leaves");
    for (std::size_t i = 0; i < g.size(); ++i)
      require(t.masks[i].empty() || t.masks[i].shape() == g[i].value.shape(), ErrorKind::kShapeMismatch,
              "mask for '" + g[i].name + "' has shape " + shape_str(t.masks[i].shape()));
  }
}

inline double clip_scale(double norm, double bound) { return norm > bound ? bound / norm : 1.0; }

}  // namespace detail

inline GradientSet apply_inferred(const InferredTransform& t, const GradientSet& g) {
  detail::check_transform(t, g);
  GradientSet out = g;
  switch (t.kind) {
    case TransformKind::kIdentity: break;
    case TransformKind::kClip:
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double s = detail::clip_scale(l2_norm(out[i].value), t.clip_bounds[i]);
        if (s != 1.0) out[i].value = scale(out[i].value, static_cast<Real>(s));
      }
      break;
    case TransformKind::kSparsify:
    case TransformKind::kSoteria:
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (t.masks[i].empty()) continue;
        Tensor& v = out[i].value;
        for (std::size_t j = 0; j < v.size(); ++j)
          if (t.masks[i][j] == 0) v[j] = 0;
      }
      break;
  }
  return out;
}

// Jacobian-transpose of apply_inferred at g applied to `upstream`.
inline GradientSet apply_inferred_vjp(const InferredTransform& t, const GradientSet& g, const GradientSet& upstream) {
  detail::check_transform(t, g);
  g.check_layout(upstream, "apply_inferred_vjp");
  if (t.kind != TransformKind::kClip) return apply_inferred(t, upstream);
  GradientSet out = upstream;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Tensor& x = g[i].value;
    const double norm = l2_norm(x), bound = t.clip_bounds[i];
    if (norm <= bound) continue;
    const double s = bound / norm;
    const double proj = dot(x, upstream[i].value) * bound / (norm * norm * norm);
    Tensor& u = out[i].value;
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = static_cast<Real>(s * u[j] - proj * x[j]);
  }
  return out;
}

}  // namespace glens
