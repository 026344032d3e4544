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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "glens/attacks/attacks.hpp"
#include "glens/bench/metrics.hpp"
#include "glens/bench/png.hpp"
#include "glens/core/error.hpp"

namespace glens {

// Two-sided sign test on n non-tied pairs with k wins.
inline double sign_test_p(std::size_t wins, std::size_t n) {
  if (n == 0) return 1.0;
  const std::size_t k = std::max(wins, n - wins);
  double tail = 0;
  for (std::size_t i = k; i <= n; ++i) tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                                                        std::lgamma(n - i + 1.0) - static_cast<double>(n) * std::log(2.0));
  return std::min(1.0, 2.0 * tail);
}

struct PairedStat {
  std::string metric;
  double mean_a = 0;
  double mean_b = 0;
  std::size_t wins = 0;  // pairs where A is better
  std::size_t losses = 0;
  std::size_t ties = 0;
  double win_rate = 0;  // ties count one half
  double p_value = 1;
};

// Seed-paired comparison of A against B on values where larger is better
// (pass negated values for lower-is-better metrics).
inline PairedStat paired_compare(const std::string& metric, const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), ErrorKind::kInvalidArgument,
          "paired_compare: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " results");
  PairedStat s;
  s.metric = metric;
  const std::size_t n = a.size();
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i) {
    s.mean_a += a[i] / static_cast<double>(n);
    s.mean_b += b[i] / static_cast<double>(n);
    if (a[i] > b[i]) ++s.wins;
    else if (a[i] < b[i]) ++s.losses;
    else ++s.ties;
  }
  s.win_rate = (static_cast<double>(s.wins) + 0.5 * static_cast<double>(s.ties)) / static_cast<double>(n);
  s.p_value = sign_test_p(s.wins, s.wins + s.losses);
  return s;
}

// psnr, ssim (higher is better) and mse (lower is better).
inline std::vector<PairedStat> paired_compare(const std::vector<MetricResult>& a, const std::vector<MetricResult>& b) {
  require(a.size() == b.size(), ErrorKind::kInvalidArgument,
          "paired_compare: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " results");
  std::vector<double> pa, pb, sa, sb, ma, mb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa.push_back(a[i].psnr);
    pb.push_back(b[i].psnr);
    sa.push_back(a[i].ssim);
    sb.push_back(b[i].ssim);
    ma.push_back(-a[i].mse);
    mb.push_back(-b[i].mse);
  }
  std::vector<PairedStat> out{paired_compare("psnr", pa, pb), paired_compare("ssim", sa, sb),
                              paired_compare("mse", ma, mb)};
  out[2].mean_a = -out[2].mean_a;
  out[2].mean_b = -out[2].mean_b;
  return out;
}

// One row of a results table.
struct BenchResult {
  std::string method;
  std::uint64_t seed = 0;
  MetricResult metrics;
  std::string chosen_stage;
  double best_loss = 0;
  std::optional<double> wall_time_s;
  std::vector<StageTrace> stages;
  Tensor truth;
  Tensor recon;
};

inline BenchResult make_result(const std::string& method, std::uint64_t seed, const ReconstructionReport& rep,
                               const Tensor& truth) {
  BenchResult r;
  r.method = method;
  r.seed = seed;
  r.metrics = evaluate(rep.final_images, truth);
  r.chosen_stage = rep.chosen_stage;
  r.best_loss = rep.best_loss;
  r.stages = rep.stages;
  r.truth = truth;
  r.recon = rep.final_images;
  return r;
}

inline const char* kResultColumns = "method,seed,psnr,ssim,mse,lpips,chosen_stage,best_loss,wall_time_s";

inline std::string format_number(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string results_csv(const std::vector<BenchResult>& results) {
  std::ostringstream os;
  os << kResultColumns << '\n';
  for (const auto& r : results) {
    os << r.method << ',' << r.seed << ',' << format_number(r.metrics.psnr) << ',' << format_number(r.metrics.ssim)
       << ',' << format_number(r.metrics.mse, 9) << ',' << (r.metrics.lpips ? format_number(*r.metrics.lpips) : "")
       << ',' << r.chosen_stage << ',' << format_number(r.best_loss, 9) << ','
       << (r.wall_time_s ? format_number(*r.wall_time_s, 3) : "") << '\n';
  }
  return os.str();
}

struct ParsedRow {
  std::string method;
  std::uint64_t seed = 0;
  double psnr = 0, ssim = 0, mse = 0, best_loss = 0;
  std::string chosen_stage;
};

inline std::vector<ParsedRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  require(line == kResultColumns, ErrorKind::kMalformedHeader, "unexpected results header '" + line + "'");
  std::vector<ParsedRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    while (f.size() < 9) f.emplace_back();
    ParsedRow r;
    r.method = f[0];
    r.seed = std::stoull(f[1]);
    r.psnr = std::stod(f[2]);
    r.ssim = std::stod(f[3]);
    r.mse = std::stod(f[4]);
    r.chosen_stage = f[6];
    r.best_loss = std::stod(f[7]);
    rows.push_back(r);
  }
  return rows;
}

inline std::string curves_csv(const std::vector<StageTrace>& stages) {
  std::ostringstream os;
  os << "stage,iter,loss,lr\n";
  for (const auto& st : stages)
    for (std::size_t i = 0; i < st.loss.size(); ++i)
      os << st.stage_id << ',' << i << ',' << format_number(st.loss[i], 9) << ',' << format_number(st.lr[i], 9)
         << '\n';
  return os.str();
}

// Loss curve of consecutive stages as a self-contained SVG polyline plot.
inline std::string curves_svg(const std::vector<StageTrace>& stages, const std::string& title) {
  std::vector<double> ys;
  std::vector<std::size_t> boundaries;
  for (const auto& st : stages) {
    boundaries.push_back(ys.size());
    ys.insert(ys.end(), st.loss.begin(), st.loss.end());
  }
  const double width = 640, height = 320, margin = 40;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  if (!ys.empty()) {
    const double lo = *std::min_element(ys.begin(), ys.end()), hi = *std::max_element(ys.begin(), ys.end());
    const double span = hi > lo ? hi - lo : 1.0;
    auto px = [&](std::size_t i) { return margin + (width - 2 * margin) * static_cast<double>(i) / std::max<double>(1.0, ys.size() - 1.0); };
    auto py = [&](double y) { return height - margin - (height - 2 * margin) * (y - lo) / span; };
    for (std::size_t s = 1; s < boundaries.size(); ++s)
      os << "<line x1=\"" << format_number(px(boundaries[s]), 2) << "\" y1=\"" << margin << "\" x2=\""
         << format_number(px(boundaries[s]), 2) << "\" y2=\"" << height - margin
         << "\" stroke=\"#bbb\" stroke-dasharray=\"4\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) os << format_number(px(i), 2) << ',' << format_number(py(ys[i]), 2) << ' ';
    os << "\"/>\n";
    os << "<text x=\"4\" y=\"" << margin << "\" font-family=\"sans-serif\" font-size=\"10\">" << format_number(hi, 4)
       << "</text>\n<text x=\"4\" y=\"" << height - margin << "\" font-family=\"sans-serif\" font-size=\"10\">"
       << format_number(lo, 4) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << text;
  require(out.good(), ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kMissingArtifact, "cannot read '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Writes <name>.csv, <name>_summary.csv (per-method means), per-result loss
// curves (CSV and SVG) under curves/, and <name>_grid.png with the ground
// truth in the first row and one row per method.
inline void emit_report(const std::vector<BenchResult>& results, const std::filesystem::path& out_dir,
                        const std::string& name = "results") {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / (name + ".csv"), results_csv(results));

  std::vector<std::string> methods;
  for (const auto& r : results)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  std::ostringstream summary;
  summary << "method,n,psnr_mean,ssim_mean,mse_mean,best_loss_mean\n";
  for (const auto& m : methods) {
    double p = 0, s = 0, e = 0, l = 0;
    std::size_t n = 0;
    for (const auto& r : results)
      if (r.method == m) {
        p += r.metrics.psnr;
        s += r.metrics.ssim;
        e += r.metrics.mse;
        l += r.best_loss;
        ++n;
      }
    const double d = static_cast<double>(n);
    summary << m << ',' << n << ',' << format_number(p / d) << ',' << format_number(s / d) << ','
            << format_number(e / d, 9) << ',' << format_number(l / d, 9) << '\n';
  }
  write_text(out_dir / (name + "_summary.csv"), summary.str());

  const std::filesystem::path curves = out_dir / "curves";
  for (const auto& r : results) {
    if (r.stages.empty()) continue;
    std::filesystem::create_directories(curves);
    const std::string stem = name + "_" + r.method + "_" + std::to_string(r.seed);
    write_text(curves / (stem + ".csv"), curves_csv(r.stages));
    write_text(curves / (stem + ".svg"), curves_svg(r.stages, r.method + " seed " + std::to_string(r.seed)));
  }

  std::vector<Tensor> rows;
  Tensor truth_row;
  for (const auto& m : methods) {
    Tensor row;
    Tensor truths;
    for (const auto& r : results)
      if (r.method == m && !r.recon.empty()) {
        row = concat_rows(row, r.recon);
        truths = concat_rows(truths, r.truth);
      }
    if (row.empty()) continue;
    if (truth_row.empty()) {
      truth_row = truths;
      rows.push_back(truths);
    }
    rows.push_back(row);
  }
  if (!rows.empty() && (rows[0].dim(1) == 1 || rows[0].dim(1) == 3))
    write_png(out_dir / (name + "_grid.png"), image_grid(rows));
}

}  // namespace glens
