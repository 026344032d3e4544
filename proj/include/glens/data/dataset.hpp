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
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "glens/core/checkpoint.hpp"
#include "glens/core/rng.hpp"
#include "glens/core/types.hpp"

namespace glens {

// A labeled image collection held as one [N, C, H, W] tensor.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  Shape image_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.num_classes = num_classes;
    out.images = gather_rows(images, indices);
    for (std::size_t i : indices) out.labels.push_back(labels[i]);
    return out;
  }

  ImageBatch batch(std::span<const std::size_t> indices) const {
    Dataset d = subset(indices);
    return {std::move(d.images), std::move(d.labels)};
  }
};

inline Checkpoint dataset_to_checkpoint(const Dataset& d) {
  Checkpoint ckpt;
  ckpt.tensors.push_back({"images", d.images});
  Tensor labels({d.labels.size()});
  for (std::size_t i = 0; i < d.labels.size(); ++i) labels[i] = static_cast<Real>(d.labels[i]);
  ckpt.tensors.push_back({"labels", std::move(labels)});
  ckpt.metadata["kind"] = "dataset";
  ckpt.metadata["num-classes"] = std::to_string(d.num_classes);
  return ckpt;
}

inline Dataset dataset_from_checkpoint(const Checkpoint& ckpt) {
  Dataset d;
  d.images = ckpt.at("images");
  d.num_classes = std::stoul(ckpt.meta("num-classes"));
  for (Real v : ckpt.at("labels").values()) d.labels.push_back(static_cast<int>(v));
  require(d.images.rank() == 4 && d.images.dim(0) == d.labels.size(), ErrorKind::kShapeMismatch,
          "dataset images/labels disagree");
  return d;
}

enum class ShapeStyle {
  kPlain,     // flat foreground on a flat background
  kTextured,  // shaded background and striped foreground (out of distribution)
};

namespace detail {

inline double box_sdf(double x, double y, double hx, double hy) { return std::max(std::abs(x) - hx, std::abs(y) - hy); }

// Signed distance (pixels, negative inside) of class `label` at offset (x, y)
// from the shape center, for shape radius r.
inline double shape_sdf(int label, double x, double y, double r) {
  const double t = std::max(1.2, 0.22 * r);
  switch (label) {
    case 0: return std::hypot(x, y) - r;
    case 1: return std::abs(std::hypot(x, y) - 0.8 * r) - t;
    case 2: return box_sdf(x, y, 0.85 * r, 0.85 * r);
    case 3: return std::abs(box_sdf(x, y, 0.85 * r, 0.85 * r)) - t;
    case 4: return std::max(y - 0.55 * r, 0.866 * std::abs(x) - 0.5 * y - 0.55 * r);
    case 5: return std::min(box_sdf(x, y, r, t), box_sdf(x, y, t, r));
    case 6: {
      const double u = (x + y) * std::numbers::sqrt2 / 2, v = (x - y) * std::numbers::sqrt2 / 2;
      return std::min(box_sdf(u, v, r, t), box_sdf(u, v, t, r));
    }
    case 7: {
      const double period = 2 * r / 3;
      const double m = std::fmod(y + r + 10 * period, period);
      return std::max(box_sdf(x, y, r, r), std::abs(m - period / 2) - period / 4);
    }
    case 8: {
      const double period = 2 * r / 3;
      const double m = std::fmod(x + r + 10 * period, period);
      return std::max(box_sdf(x, y, r, r), std::abs(m - period / 2) - period / 4);
    }
    default: return (std::abs(x) + std::abs(y) - r) / std::numbers::sqrt2;
  }
}

}  // namespace detail

inline constexpr std::size_t kShapeClasses = 10;

// Renders one procedural shape image [C, H, W] of class `label` into `out`.
inline void render_shape(int label, std::size_t channels, std::size_t side, ShapeStyle style, Rng& rng, Real* out) {
  const double center = side / 2.0;
  const double scale = side / 32.0;
  const double cx = center + rng.uniform(-3, 3) * scale, cy = center + rng.uniform(-3, 3) * scale;
  const double r = rng.uniform(7, 11.5) * scale;
  const double bg = rng.uniform(0.0, 0.25), fg = rng.uniform(0.65, 1.0);
  const double tint[3] = {rng.uniform(0.7, 1.0), rng.uniform(0.7, 1.0), rng.uniform(0.7, 1.0)};
  const double shade_angle = rng.uniform(0, 2 * std::numbers::pi);
  const double stripe_freq = rng.uniform(0.6, 1.2);
  for (std::size_t c = 0; c < channels; ++c) {
    const double gain = channels == 1 ? 1.0 : tint[c % 3];
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        const double px = x + 0.5 - cx, py = y + 0.5 - cy;
        const double coverage = std::clamp(0.5 - detail::shape_sdf(label, px, py, r), 0.0, 1.0);
        double back = bg, front = fg * gain;
        if (style == ShapeStyle::kTextured) {
          const double u = (std::cos(shade_angle) * (x - center) + std::sin(shade_angle) * (y - center)) / side;
          back = std::clamp(0.35 + 0.6 * u, 0.0, 1.0);
          front = std::clamp(0.55 + 0.45 * std::sin(stripe_freq * (x + y)) * gain, 0.0, 1.0);
        }
        const double v = back + (front - back) * coverage + rng.normal(0.0, 0.02);
        out[(c * side + y) * side + x] = static_cast<Real>(std::clamp(v, 0.0, 1.0));
      }
  }
}

// Synthetic 10-class shapes dataset with balanced, shuffled labels.
inline Dataset make_shapes_dataset(std::size_t n, RngSeed seed, std::size_t channels = 1, std::size_t side = 32,
                                   ShapeStyle style = ShapeStyle::kPlain) {
  Rng rng(seed);
  Dataset d;
  d.num_classes = kShapeClasses;
  d.images = Tensor({n, channels, side, side});
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = static_cast<int>(i % kShapeClasses);
  rng.shuffle(d.labels);
  const std::size_t stride = channels * side * side;
  for (std::size_t i = 0; i < n; ++i) {
    Rng item = rng.fork(i);
    render_shape(d.labels[i], channels, side, style, item, d.images.data() + i * stride);
  }
  return d;
}

// Relabels every sample through `perm` (label y becomes perm[y]).
inline Dataset permute_labels(Dataset d, std::span<const int> perm) {
  for (int& y : d.labels) y = perm[static_cast<std::size_t>(y)];
  return d;
}

}  // namespace glens
