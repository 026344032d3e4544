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

// Central finite-difference probes shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "glens/core/rng.hpp"
#include "glens/core/tensor.hpp"

namespace glens::testing {

struct ProbeStats {
  std::size_t probes = 0;
  std::size_t skipped = 0;  // probes straddling a kink
  double max_rel = 0;
};

using ScalarFn = std::function<double(const Tensor&)>;
using VectorFn = std::function<Tensor(const Tensor&)>;

inline Tensor unit_direction(const Tensor& like, Rng& rng) {
  Tensor d = rng.normal_tensor(like.shape());
  const double n = l2_norm(d);
  for (auto& v : d.values()) v = static_cast<Real>(v / n);
  return d;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Checks the directional derivative <grad, d> against central differences of
// f along `probes` random unit directions d. Each direction is mixed with the
// gradient direction so the derivative is not vanishingly small. Errors are
// relative, with a floor of 1% of ||grad|| so float32 rounding in f does not
// dominate tiny derivatives. Probes where the eps and eps/2 estimates disagree
// (a ReLU or |.| kink inside the stencil) are redrawn.
inline ProbeStats check_gradient(const ScalarFn& f, const Tensor& x, const Tensor& grad, Rng& rng,
                                 std::size_t probes = 20, double eps = 1e-3) {
  ProbeStats s;
  const double gnorm = l2_norm(grad);
  const double floor = std::max(1e-6, 1e-2 * gnorm);
  std::size_t attempts = 0;
  while (s.probes < probes && attempts < 20 * probes) {
    ++attempts;
    Tensor d = unit_direction(x, rng);
    if (gnorm > 0) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<Real>(d[i] + grad[i] / gnorm);
      const double n = l2_norm(d);
      for (auto& v : d.values()) v = static_cast<Real>(v / n);
    }
    auto fd = [&](double h) {
      Tensor xp = x, xm = x;
      axpy(static_cast<Real>(h), d, xp);
      axpy(static_cast<Real>(-h), d, xm);
      return (f(xp) - f(xm)) / (2 * h);
    };
    const double a = fd(eps), b = fd(eps / 2);
    if (rel_err(a, b, floor) > 2e-3) {
      ++s.skipped;
      continue;
    }
    s.max_rel = std::max(s.max_rel, rel_err(dot(grad, d), a, floor));
    ++s.probes;
  }
  return s;
}

// Sign pattern of every intermediate activation. Two points with the same
// pattern lie on the same linear piece of a ReLU/LeakyReLU network.
using PatternFn = std::function<std::vector<bool>(const Tensor&)>;

inline std::vector<bool> sign_pattern(const std::vector<Tensor>& acts) {
  std::vector<bool> bits;
  for (const auto& a : acts)
    for (Real v : a.values()) bits.push_back(v > 0);
  return bits;
}

// Variant of check_gradient for piecewise-smooth f. A probe is used at the
// largest step in `steps` whose stencil keeps the activation pattern of x;
// probes that flip a sign at every step are redrawn. Within one piece f is
// smooth, so large steps are exact up to O(h^2) and float32 rounding stays
// small relative to the derivative.
inline ProbeStats check_gradient_piecewise(const ScalarFn& f, const PatternFn& pattern, const Tensor& x,
                                           const Tensor& grad, Rng& rng, std::size_t probes = 20,
                                           std::vector<double> steps = {1e-2, 3e-3, 1e-3, 3e-4}) {
  ProbeStats s;
  const double gnorm = l2_norm(grad);
  const double floor = std::max(1e-6, 1e-2 * gnorm);
  const std::vector<bool> base = pattern(x);
  std::size_t attempts = 0;
  while (s.probes < probes && attempts < 20 * probes) {
    ++attempts;
    Tensor d = unit_direction(x, rng);
    if (gnorm > 0) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<Real>(d[i] + grad[i] / gnorm);
      const double n = l2_norm(d);
      for (auto& v : d.values()) v = static_cast<Real>(v / n);
    }
    bool used = false;
    for (double h : steps) {
      Tensor xp = x, xm = x;
      axpy(static_cast<Real>(h), d, xp);
      axpy(static_cast<Real>(-h), d, xm);
      if (pattern(xp) != base || pattern(xm) != base) continue;
      s.max_rel = std::max(s.max_rel, rel_err(dot(grad, d), (f(xp) - f(xm)) / (2 * h), floor));
      ++s.probes;
      used = true;
      break;
    }
    if (!used) ++s.skipped;
  }
  return s;
}

// Checks a Jacobian-vector product against central differences of F along
// `dir`, measured as ||fd - jvp|| / max(||fd||, ||jvp||).
inline double jvp_error(const VectorFn& F, const Tensor& x, const Tensor& dir, const Tensor& jvp, double eps = 1e-3) {
  Tensor xp = x, xm = x;
  axpy(static_cast<Real>(eps), dir, xp);
  axpy(static_cast<Real>(-eps), dir, xm);
  Tensor fd = sub(F(xp), F(xm));
  for (auto& v : fd.values()) v = static_cast<Real>(v / (2 * eps));
  const double denom = std::max({l2_norm(fd), l2_norm(jvp), 1e-6});
  return l2_norm(sub(fd, jvp)) / denom;
}

}  // namespace glens::testing
