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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "glens/core/error.hpp"
#include "glens/core/tensor.hpp"
#include "glens/core/types.hpp"

namespace glens {

inline constexpr double kPsnrCap = 100.0;

struct MetricResult {
  double psnr = 0;
  double ssim = 0;
  double mse = 0;
  std::optional<double> lpips;
  bool psnr_capped = false;
};

inline double mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  require(a.size() > 0, ErrorKind::kInvalidArgument, "mse of empty images");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

inline double mse(const ImageBatch& a, const ImageBatch& b) { return mse(a.pixels, b.pixels); }

// PSNR for unit dynamic range; mse == 0 is reported as the 100 dB cap.
inline double psnr_from_mse(double m, bool* capped = nullptr) {
  if (capped) *capped = m <= 0;
  if (m <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

inline double psnr(const Tensor& a, const Tensor& b, bool* capped = nullptr) { return psnr_from_mse(mse(a, b), capped); }
inline double psnr(const ImageBatch& a, const ImageBatch& b) { return psnr(a.pixels, b.pixels); }

enum class SsimWindow { kGaussian11, kUniform8 };

struct SsimOptions {
  SsimWindow window = SsimWindow::kGaussian11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

inline std::vector<double> ssim_window(const SsimOptions& opt, std::size_t* size) {
  if (opt.window == SsimWindow::kUniform8) {
    *size = 8;
    return std::vector<double>(64, 1.0 / 64.0);
  }
  *size = 11;
  std::vector<double> g(11);
  double total = 0;
  for (int i = 0; i < 11; ++i) {
    g[static_cast<std::size_t>(i)] = std::exp(-((i - 5) * (i - 5)) / (2 * opt.sigma * opt.sigma));
    total += g[static_cast<std::size_t>(i)];
  }
  std::vector<double> w(121);
  for (std::size_t r = 0; r < 11; ++r)
    for (std::size_t c = 0; c < 11; ++c) w[r * 11 + c] = g[r] * g[c] / (total * total);
  return w;
}

// Single-scale SSIM over valid windows, averaged over windows, channels and
// batch items. Expects [B, C, H, W].
inline double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt = {}) {
  check_same_shape(a, b, "ssim");
  require(a.rank() == 4, ErrorKind::kShapeMismatch, "ssim expects [B, C, H, W], got " + shape_str(a.shape()));
  std::size_t win = 0;
  const std::vector<double> w = ssim_window(opt, &win);
  const std::size_t planes = a.dim(0) * a.dim(1), h = a.dim(2), wd = a.dim(3);
  require(h >= win && wd >= win, ErrorKind::kInvalidArgument,
          "image " + std::to_string(h) + "x" + std::to_string(wd) + " is smaller than the " + std::to_string(win) +
              "x" + std::to_string(win) + " SSIM window");
  double total = 0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < planes; ++p) {
    const Real* x = a.data() + p * h * wd;
    const Real* y = b.data() + p * h * wd;
    for (std::size_t r0 = 0; r0 + win <= h; ++r0)
      for (std::size_t c0 = 0; c0 + win <= wd; ++c0) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (std::size_t r = 0; r < win; ++r)
          for (std::size_t c = 0; c < win; ++c) {
            const double k = w[r * win + c];
            const double xv = x[(r0 + r) * wd + c0 + c], yv = y[(r0 + r) * wd + c0 + c];
            mx += k * xv;
            my += k * yv;
            xx += k * xv * xv;
            yy += k * yv * yv;
            xy += k * xv * yv;
          }
        const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
        total += ((2 * mx * my + opt.c1) * (2 * cxy + opt.c2)) / ((mx * mx + my * my + opt.c1) * (vx + vy + opt.c2));
        ++count;
      }
  }
  return total / static_cast<double>(count);
}

inline double ssim(const ImageBatch& a, const ImageBatch& b, const SsimOptions& opt = {}) {
  return ssim(a.pixels, b.pixels, opt);
}

// Optional perceptual scorer (e.g. LPIPS) supplied by the caller.
using PerceptualScorer = std::function<double(const Tensor&, const Tensor&)>;

// Metrics of a reconstruction against the ground truth. PSNR, SSIM and MSE
// are averaged over batch items.
inline MetricResult evaluate(const Tensor& recon, const Tensor& truth, const PerceptualScorer& lpips = {},
                             const SsimOptions& opt = {}) {
  check_same_shape(truth, recon, "evaluate");
  MetricResult m;
  const std::size_t batch = truth.dim(0);
  for (std::size_t b = 0; b < batch; ++b) {
    const Tensor r = batch_item(recon, b), t = batch_item(truth, b);
    const double e = mse(r, t);
    bool capped = false;
    m.mse += e;
    m.psnr += psnr_from_mse(e, &capped);
    m.psnr_capped = m.psnr_capped || capped;
    m.ssim += ssim(r, t, opt);
  }
  m.mse /= static_cast<double>(batch);
  m.psnr /= static_cast<double>(batch);
  m.ssim /= static_cast<double>(batch);
  if (lpips) m.lpips = lpips(recon, truth);
  return m;
}

}  // namespace glens
