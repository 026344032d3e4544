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
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "glens/core/error.hpp"
#include "glens/core/rng.hpp"
#include "glens/core/types.hpp"
#include "glens/models/classifier.hpp"

namespace glens {

enum class DefenseKind { kNone, kNoise, kClip, kSparsify, kSoteria };

inline std::string to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::kNone: return "none";
    case DefenseKind::kNoise: return "noise";
    case DefenseKind::kClip: return "clip";
    case DefenseKind::kSparsify: return "sparsify";
    case DefenseKind::kSoteria: return "soteria";
  }
  return "none";
}

inline DefenseKind parse_defense_kind(const std::string& s) {
  for (auto k : {DefenseKind::kNone, DefenseKind::kNoise, DefenseKind::kClip, DefenseKind::kSparsify,
                 DefenseKind::kSoteria})
    if (to_string(k) == s) return k;
  fail(ErrorKind::kConfig, "unknown defense kind '" + s + "'");
}

struct DefenseSpec {
  DefenseKind kind = DefenseKind::kNone;
  double noise_std = 0.1;
  double clip_bound = 4.0;
  double prune_rate = 0.9;
  double soteria_rate = 0.8;
  std::string defended_layer = Classifier::kFcWeight;
  RngSeed seed{0};

  void validate() const {
    switch (kind) {
      case DefenseKind::kNoise:
        require(noise_std >= 0, ErrorKind::kConfig, "noise std must be >= 0");
        break;
      case DefenseKind::kClip:
        require(clip_bound > 0, ErrorKind::kConfig, "clip bound must be > 0");
        break;
      case DefenseKind::kSparsify:
        require(prune_rate > 0 && prune_rate < 1, ErrorKind::kConfig, "prune rate must lie in (0, 1)");
        break;
      case DefenseKind::kSoteria:
        require(soteria_rate > 0 && soteria_rate < 1, ErrorKind::kConfig, "soteria rate must lie in (0, 1)");
        require(!defended_layer.empty(), ErrorKind::kConfig, "soteria needs a defended layer");
        break;
      case DefenseKind::kNone: break;
    }
  }
};

// Number of entries kept when a fraction `rate` of n is dropped:
// ceil((1 - rate) * n), guarded against representation error.
inline std::size_t kept_count(std::size_t n, double rate) {
  const double keep = (1.0 - rate) * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::ceil(keep - 1e-9)));
}

inline GradientSet apply_noise(const GradientSet& g, double sigma, RngSeed seed) {
  require(sigma >= 0, ErrorKind::kInvalidArgument, "noise std must be >= 0");
  GradientSet out = g;
  if (sigma == 0) return out;
  Rng rng(seed);
  for (auto& e : out.entries())
    for (auto& v : e.value.values()) v = static_cast<Real>(v + sigma * rng.normal());
  return out;
}

// Layer-wise g * min(c / |g|, 1).
inline GradientSet apply_clipping(const GradientSet& g, double c) {
  require(c > 0, ErrorKind::kInvalidArgument, "clip bound must be > 0");
  GradientSet out = g;
  for (auto& e : out.entries()) {
    const double norm = l2_norm(e.value);
    if (norm > c) e.value = scale(e.value, static_cast<Real>(c / norm));
  }
  return out;
}

namespace detail {

// Indices of the k largest scores; ties keep the lower index.
inline std::vector<std::size_t> top_k(const std::vector<double>& score, std::size_t k) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

}  // namespace detail

// Keeps the ceil((1 - p) n) largest-magnitude entries of every leaf.
inline GradientSet apply_sparsification(const GradientSet& g, double p) {
  require(p >= 0 && p < 1, ErrorKind::kInvalidArgument, "prune rate must lie in [0, 1)");
  GradientSet out = g;
  for (auto& e : out.entries()) {
    const std::size_t n = e.value.size();
    std::vector<double> mag(n);
    for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(static_cast<double>(e.value[i]));
    std::vector<char> keep(n, 0);
    for (std::size_t i : detail::top_k(mag, kept_count(n, p))) keep[i] = 1;
    for (std::size_t i = 0; i < n; ++i)
      if (!keep[i]) e.value[i] = 0;
  }
  return out;
}

// Per-feature leakage score of the defended layer's input representation r:
// sum_b |r_bj| * |d r_bj / d x_b|.
inline std::vector<double> soteria_scores(const Classifier& model, const Tensor& images) {
  check_images(model, images);
  const std::size_t depth = model.feature_depth();
  const Trace trace = model.net.forward(images, depth);
  const Tensor& r = trace.output();
  const std::size_t batch = r.dim(0), features = r.dim(1);
  const std::size_t per_item = images.size() / batch;
  std::vector<double> score(features, 0.0);
  for (std::size_t j = 0; j < features; ++j) {
    Tensor seed(r.shape());
    for (std::size_t b = 0; b < batch; ++b) seed[b * features + j] = 1;
    const Tensor jac = model.net.backward(trace, std::move(seed), nullptr, true);
    for (std::size_t b = 0; b < batch; ++b) {
      double sq = 0;
      for (std::size_t k = 0; k < per_item; ++k) {
        const double v = jac[b * per_item + k];
        sq += v * v;
      }
      score[j] += std::abs(static_cast<double>(r[b * features + j])) * std::sqrt(sq);
    }
  }
  return score;
}

// Indices of the representation features whose FC-weight columns Soteria
// zeroes: the top p_s share by leakage score.
inline std::vector<std::size_t> soteria_masked_columns(const Classifier& model, const Tensor& images, double p_s) {
  const std::vector<double> score = soteria_scores(model, images);
  const std::size_t n = score.size();
  std::vector<std::size_t> cols = detail::top_k(score, n - kept_count(n, p_s));
  std::sort(cols.begin(), cols.end());
  return cols;
}

inline GradientSet apply_soteria(const GradientSet& g, const Classifier& model, const ImageBatch& batch, double p_s,
                                 const std::string& defended_layer = Classifier::kFcWeight) {
  require(p_s > 0 && p_s < 1, ErrorKind::kInvalidArgument, "soteria rate must lie in (0, 1)");
  require(defended_layer == Classifier::kFcWeight, ErrorKind::kInvalidArgument,
          "soteria can only defend the classification layer '" + std::string(Classifier::kFcWeight) + "', not '" +
              defended_layer + "'");
  GradientSet out = g;
  Tensor& w = out.entries()[out.index_of(defended_layer)].value;
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  require(cols == model.feature_dim(), ErrorKind::kShapeMismatch, "defended layer does not match the model");
  for (std::size_t c : soteria_masked_columns(model, batch.pixels, p_s))
    for (std::size_t r = 0; r < rows; ++r) w[r * cols + c] = 0;
  return out;
}

// Applies `spec` to raw gradients `g` computed by `model` on `batch`.
inline GradientSet apply_defense(const DefenseSpec& spec, const GradientSet& g, const Classifier& model,
                                 const ImageBatch& batch) {
  spec.validate();
  switch (spec.kind) {
    case DefenseKind::kNone: return g;
    case DefenseKind::kNoise: return apply_noise(g, spec.noise_std, spec.seed);
    case DefenseKind::kClip: return apply_clipping(g, spec.clip_bound);
    case DefenseKind::kSparsify: return apply_sparsification(g, spec.prune_rate);
    case DefenseKind::kSoteria: return apply_soteria(g, model, batch, spec.soteria_rate, spec.defended_layer);
  }
  return g;
}

}  // namespace glens
