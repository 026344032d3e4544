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
#include <numeric>
#include <string>
#include <vector>

#include "glens/core/error.hpp"
#include "glens/core/log.hpp"
#include "glens/core/types.hpp"
#include "glens/models/classifier.hpp"

namespace glens {

enum class LabelMethod { kExtractedSingle, kInferredBatch, kMapped, kGiven };

inline std::string to_string(LabelMethod m) {
  switch (m) {
    case LabelMethod::kExtractedSingle: return "extracted-single";
    case LabelMethod::kInferredBatch: return "inferred-batch";
    case LabelMethod::kMapped: return "mapped";
    case LabelMethod::kGiven: return "given";
  }
  return "given";
}

struct LabelEstimate {
  std::vector<int> labels;
  LabelMethod method = LabelMethod::kGiven;
  std::string confidence_note;
  bool low_confidence = false;
};

namespace detail {

inline const Tensor& fc_gradient(const GradientSet& g, const std::string& fc_leaf) {
  const Tensor& w = g.at(fc_leaf);
  require(w.rank() == 2, ErrorKind::kShapeMismatch, "FC gradient '" + fc_leaf + "' must be 2-D");
  return w;
}

}  // namespace detail

struct SingleLabel {
  int label = 0;
  bool low_confidence = false;
};

// The row i of the FC weight gradient with <dW_i, dW_j> <= 0 for every other
// row j. With non-negative features and B = 1 this is the true class. When
// several rows qualify the one with the smallest row sum wins; when none
// does, the smallest row sum is returned and flagged.
inline SingleLabel extract_single_label_checked(const GradientSet& g,
                                                const std::string& fc_leaf = Classifier::kFcWeight) {
  const Tensor& w = detail::fc_gradient(g, fc_leaf);
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  auto row_dot = [&](std::size_t a, std::size_t b) {
    double acc = 0;
    for (std::size_t c = 0; c < cols; ++c) acc += static_cast<double>(w[a * cols + c]) * w[b * cols + c];
    return acc;
  };
  std::vector<double> sums(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) sums[r] += w[r * cols + c];

  int best = -1;
  for (std::size_t i = 0; i < rows; ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < rows && ok; ++j)
      if (j != i && row_dot(i, j) > 0) ok = false;
    if (ok && (best < 0 || sums[i] < sums[static_cast<std::size_t>(best)])) best = static_cast<int>(i);
  }
  if (best >= 0) return {best, false};
  const auto it = std::min_element(sums.begin(), sums.end());
  return {static_cast<int>(it - sums.begin()), true};
}

inline int extract_single_label(const GradientSet& g, const std::string& fc_leaf = Classifier::kFcWeight) {
  return extract_single_label_checked(g, fc_leaf).label;
}

// The B classes whose FC weight-gradient rows reach the most negative
// entries, assuming the batch holds B distinct labels. Returned in
// ascending class order.
inline LabelEstimate infer_batch_labels(const GradientSet& g, std::size_t batch,
                                        const std::string& fc_leaf = Classifier::kFcWeight) {
  const Tensor& w = detail::fc_gradient(g, fc_leaf);
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  require(batch >= 1, ErrorKind::kInvalidArgument, "batch size must be >= 1");
  require(batch <= rows, ErrorKind::kInvalidArgument,
          "cannot infer " + std::to_string(batch) + " distinct labels from " + std::to_string(rows) + " classes");
  LabelEstimate est;
  est.method = LabelMethod::kInferredBatch;
  if (batch == 1) {
    const SingleLabel s = extract_single_label_checked(g, fc_leaf);
    est.labels = {s.label};
    est.method = LabelMethod::kExtractedSingle;
    est.low_confidence = s.low_confidence;
    est.confidence_note = s.low_confidence ? "no row satisfies the sign condition; fell back to minimum row sum"
                                           : "exact sign-pattern extraction";
    return est;
  }
  std::vector<double> row_min(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double m = w[r * cols];
    for (std::size_t c = 1; c < cols; ++c) m = std::min(m, static_cast<double>(w[r * cols + c]));
    row_min[r] = m;
  }
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return row_min[a] < row_min[b]; });
  for (std::size_t i = 0; i < batch; ++i) est.labels.push_back(static_cast<int>(idx[i]));
  std::sort(est.labels.begin(), est.labels.end());
  est.confidence_note = "heuristic: most negative row minimum, unique-label assumption";
  return est;
}

// Per-sample argmax of f_m on the coarse reconstruction.
inline LabelEstimate map_label(const Tensor& coarse, const Classifier& f_m) {
  const Tensor logits = classifier_forward(f_m, coarse);
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  LabelEstimate est;
  est.method = LabelMethod::kMapped;
  est.confidence_note = "argmax of the mapping classifier on the coarse reconstruction";
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (logits[r * cols + c] > logits[r * cols + best]) best = c;
    est.labels.push_back(static_cast<int>(best));
  }
  return est;
}

inline LabelEstimate map_label(const ImageBatch& coarse, const Classifier& f_m) { return map_label(coarse.pixels, f_m); }

}  // namespace glens
