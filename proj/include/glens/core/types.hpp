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

#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "glens/core/checkpoint.hpp"
#include "glens/core/error.hpp"
#include "glens/core/tensor.hpp"

namespace glens {

// A batch of images [B, C, H, W] with pixel values in [0, 1].
struct ImageBatch {
  Tensor pixels;
  std::optional<std::vector<int>> labels;

  std::size_t batch_size() const { return pixels.rank() == 0 ? 0 : pixels.dim(0); }
  Shape image_shape() const { return Shape(pixels.shape().begin() + 1, pixels.shape().end()); }

  void validate() const {
    require(pixels.rank() == 4, ErrorKind::kShapeMismatch,
            "image batch must be [B, C, H, W], got " + shape_str(pixels.shape()));
    for (Real v : pixels.values())
      require(v >= 0 && v <= 1, ErrorKind::kOutOfRange, "pixel value outside [0, 1]");
    if (labels)
      require(labels->size() == batch_size(), ErrorKind::kShapeMismatch,
              "label count " + std::to_string(labels->size()) + " != batch size " +
                  std::to_string(batch_size()));
  }
};

// Per-leaf gradients of a model, in the model's parameter declaration order.
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(std::vector<NamedTensor> entries) : entries_(std::move(entries)) {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries_)
      require(seen.insert(e.name).second, ErrorKind::kInvalidArgument,
              "duplicate gradient leaf '" + e.name + "'");
  }

  // A zero-filled set with the same leaves and shapes.
  static GradientSet zeros_like(const GradientSet& other) {
    std::vector<NamedTensor> entries;
    for (const auto& e : other.entries_) entries.push_back({e.name, Tensor::zeros_like(e.value)});
    return GradientSet(std::move(entries));
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<NamedTensor>& entries() { return entries_; }
  NamedTensor& operator[](std::size_t i) { return entries_[i]; }
  const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].name == name) return i;
    fail(ErrorKind::kInvalidArgument, "no gradient leaf named '" + name + "'");
  }
  const Tensor& at(const std::string& name) const { return entries_[index_of(name)].value; }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  bool same_layout(const GradientSet& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (entries_[i].name != other.entries_[i].name ||
          entries_[i].value.shape() != other.entries_[i].value.shape())
        return false;
    return true;
  }

  void check_layout(const GradientSet& other, const char* what) const {
    if (same_layout(other)) return;
    std::string msg = std::string(what) + ": gradient layouts differ";
    if (other.size() != size()) {
      msg += " (" + std::to_string(size()) + " vs " + std::to_string(other.size()) + " leaves)";
    } else {
      for (std::size_t i = 0; i < size(); ++i)
        if (entries_[i].value.shape() != other.entries_[i].value.shape() ||
            entries_[i].name != other.entries_[i].name) {
          msg += " at leaf '" + entries_[i].name + "': expected " + shape_str(entries_[i].value.shape()) +
                 ", got '" + other.entries_[i].name + "' " + shape_str(other.entries_[i].value.shape());
          break;
        }
    }
    fail(ErrorKind::kShapeMismatch, msg);
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.tensors = entries_;
    return ckpt;
  }
  static GradientSet from_checkpoint(const Checkpoint& ckpt) { return GradientSet(ckpt.tensors); }

  friend bool operator==(const GradientSet&, const GradientSet&) = default;

 private:
  std::vector<NamedTensor> entries_;
};

inline double dot(const GradientSet& a, const GradientSet& b) {
  a.check_layout(b, "dot");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += dot(a[i].value, b[i].value);
  return acc;
}

inline double squared_norm(const GradientSet& g) {
  double acc = 0;
  for (const auto& e : g.entries()) acc += squared_norm(e.value);
  return acc;
}

inline GradientSet scale(const GradientSet& g, Real s) {
  GradientSet out = g;
  for (auto& e : out.entries()) e.value = scale(e.value, s);
  return out;
}

inline GradientSet add(const GradientSet& a, const GradientSet& b) {
  a.check_layout(b, "add");
  GradientSet out = a;
  for (std::size_t i = 0; i < a.size(); ++i) add_inplace(out[i].value, b[i].value);
  return out;
}

}  // namespace glens
