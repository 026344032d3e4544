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

#include <span>

#include "glens/gradmatch/distance.hpp"
#include "glens/gradmatch/transform.hpp"
#include "glens/models/classifier.hpp"

namespace glens {

struct MatchObjective {
  Distance distance = Distance::kNegCosine;
  double alpha_tv = 1e-4;
  double alpha_l2 = 1e-6;
  bool per_layer = false;
  InferredTransform transform;

  DistanceOptions distance_options() const { return {distance, per_layer}; }
};

struct AttackLoss {
  double value = 0;     // match + regularizer
  double match = 0;     // gradient distance alone
  double regularizer = 0;
  Tensor grad;          // d value / d images (when requested)
};

// D(T(grad_theta loss(x)), g_observed) + R_fidelity(x), optionally with its
// exact gradient with respect to the images.
inline AttackLoss attack_loss_with_grad(const Tensor& images, std::span<const int> labels, const Classifier& model,
                                        const GradientSet& observed, const MatchObjective& obj,
                                        bool want_grad = true) {
  const DummyGradients d = dummy_gradients(model, images, labels);
  const GradientSet transformed = apply_inferred(obj.transform, d.grads);
  DistanceValue dist = grad_distance_with_grad(transformed, observed, obj.distance_options(), want_grad);
  FidelityValue fid = fidelity_reg_with_grad(images, obj.alpha_tv, obj.alpha_l2, want_grad);
  AttackLoss out;
  out.match = dist.value;
  out.regularizer = fid.value;
  out.value = dist.value + fid.value;
  if (want_grad) {
    const GradientSet direction = apply_inferred_vjp(obj.transform, d.grads, dist.grad);
    out.grad = parameter_gradient_vjp(model, d, direction);
    add_inplace(out.grad, fid.grad);
  }
  return out;
}

inline double attack_loss(const Tensor& images, std::span<const int> labels, const Classifier& model,
                          const GradientSet& observed, const MatchObjective& obj) {
  return attack_loss_with_grad(images, labels, model, observed, obj, false).value;
}

inline double attack_loss(const ImageBatch& images, std::span<const int> labels, const Classifier& model,
                          const GradientSet& observed, const MatchObjective& obj) {
  return attack_loss(images.pixels, labels, model, observed, obj);
}

}  // namespace glens
