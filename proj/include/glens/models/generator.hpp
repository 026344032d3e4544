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

// Conditional deconvolutional generator split into blocks G_0 ... G_N.
//
//   G_0      [z, embed(y)] -> linear -> [c_0, 4, 4]
//   G_1..    nearest 2x upsample -> 3x3 conv -> leaky relu   (one per stage)
//   G_N      3x3 conv -> sigmoid                              (image in [0, 1])
//
// Block i consumes feature h_i (h_0 is the latent z) and produces h_{i+1}.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glens/core/checkpoint.hpp"
#include "glens/core/rng.hpp"
#include "glens/core/types.hpp"
#include "glens/models/layers.hpp"
#include "glens/models/sequential.hpp"

namespace glens {

struct GeneratorSpec {
  std::size_t latent_dim = 16;
  std::size_t num_classes = 10;  // 0 for an unconditional generator
  std::size_t embed_dim = 8;
  Shape image_shape{1, 32, 32};
  // Channels of h_1 ... h_{N}: the first is the 4x4 seed, each further entry
  // one upsampling stage.
  std::vector<std::size_t> channels{32, 32, 16, 8};
};

// An intermediate feature h_i together with its block index.
struct FeatureVec {
  Tensor values;
  std::size_t layer = 0;
};

class GeneratorStack {
 public:
  GeneratorStack() = default;

  explicit GeneratorStack(GeneratorSpec spec) : spec_(std::move(spec)) {
    const auto& ch = spec_.channels;
    require(spec_.image_shape.size() == 3, ErrorKind::kInvalidArgument, "image shape must be [C, H, W]");
    require(!ch.empty(), ErrorKind::kInvalidArgument, "generator needs at least one channel entry");
    const std::size_t size = 4u << (ch.size() - 1);
    require(spec_.image_shape[1] == size && spec_.image_shape[2] == size, ErrorKind::kInvalidArgument,
            std::to_string(ch.size()) + " generator stages produce " + std::to_string(size) + "x" +
                std::to_string(size) + " images, not " + shape_str(spec_.image_shape));
    if (conditional()) embedding_ = Tensor({spec_.num_classes, spec_.embed_dim});

    const std::size_t in0 = spec_.latent_dim + (conditional() ? spec_.embed_dim : 0);
    blocks_.emplace_back(Shape{in0}, std::vector<NamedLayer>{
                                         {"fc", std::make_shared<Linear>(in0, ch[0] * 16)},
                                         {"reshape", std::make_shared<Reshape>(Shape{ch[0], 4, 4})},
                                         {"act", std::make_shared<LeakyRelu>(Real(0.2))}});
    std::size_t side = 4;
    for (std::size_t s = 1; s < ch.size(); ++s) {
      blocks_.emplace_back(Shape{ch[s - 1], side, side},
                           std::vector<NamedLayer>{{"up", std::make_shared<Upsample2x>()},
                                                   {"conv", std::make_shared<Conv2d>(ch[s - 1], ch[s], 3, 1, 1)},
                                                   {"act", std::make_shared<LeakyRelu>(Real(0.2))}});
      side *= 2;
    }
    blocks_.emplace_back(Shape{ch.back(), side, side},
                         std::vector<NamedLayer>{
                             {"conv", std::make_shared<Conv2d>(ch.back(), spec_.image_shape[0], 3, 1, 1)},
                             {"squash", std::make_shared<Sigmoid>()}});
  }

  void init(Rng& rng) {
    for (auto& v : embedding_.values()) v = static_cast<Real>(rng.normal());
    for (auto& b : blocks_) b.init(rng);
  }

  const GeneratorSpec& spec() const { return spec_; }
  bool conditional() const { return spec_.num_classes > 0; }
  std::size_t latent_dim() const { return spec_.latent_dim; }
  std::size_t num_blocks() const { return blocks_.size(); }
  // N: index of the last block.
  std::size_t depth() const { return blocks_.size() - 1; }

  Sequential& block(std::size_t i) { return blocks_.at(i); }
  const Sequential& block(std::size_t i) const { return blocks_.at(i); }
  Tensor& embedding() { return embedding_; }
  const Tensor& embedding() const { return embedding_; }

  // Shape of h_i for a batch of `batch` samples (h_0 is the latent).
  Shape feature_shape(std::size_t i, std::size_t batch) const {
    require(i <= depth(), ErrorKind::kOutOfRange,
            "layer index " + std::to_string(i) + " outside [0, " + std::to_string(depth()) + "]");
    if (i == 0) return {batch, spec_.latent_dim};
    return blocks_[i].batch_input_shape(batch);
  }

  // Runs G_0 ... G_{i-1}; i == 0 returns z itself.
  FeatureVec head(const Tensor& z, std::span<const int> labels, std::size_t i) const {
    FeatureVec h{z, 0};
    while (h.layer < i) h = step(h, labels);
    return h;
  }

  // One block: h_{i+1} = G_i(h_i).
  FeatureVec step(const FeatureVec& h, std::span<const int> labels) const {
    check_feature(h);
    require(h.layer <= depth(), ErrorKind::kOutOfRange, "cannot step past the output block");
    const Tensor in = h.layer == 0 ? block_input(h.values, labels) : h.values;
    return {blocks_[h.layer].output(in), h.layer + 1};
  }

  // G_i o ... o G_N applied to h_i.
  Tensor tail(const FeatureVec& h, std::span<const int> labels) const {
    check_feature(h);
    FeatureVec cur = h;
    while (cur.layer <= depth()) cur = step(cur, labels);
    return cur.values;
  }

  Tensor generate(const Tensor& z, std::span<const int> labels) const { return tail({z, 0}, labels); }

  struct TailTrace {
    std::size_t start = 0;
    std::vector<int> labels;
    std::vector<Trace> blocks;
    const Tensor& images() const { return blocks.back().output(); }
  };

  TailTrace tail_trace(const FeatureVec& h, std::span<const int> labels) const {
    check_feature(h);
    TailTrace t;
    t.start = h.layer;
    t.labels.assign(labels.begin(), labels.end());
    Tensor cur = h.layer == 0 ? block_input(h.values, labels) : h.values;
    for (std::size_t i = h.layer; i <= depth(); ++i) {
      t.blocks.push_back(blocks_[i].forward(cur));
      cur = t.blocks.back().output();
    }
    return t;
  }

  // Gradients of the tail: returns d/dh_start. When `grads` is non-null it
  // must hold one tensor per block parameter (block order) followed by the
  // embedding gradient, and is accumulated into.
  Tensor tail_backward(const TailTrace& t, Tensor grad_images, std::vector<Tensor>* grads = nullptr) const {
    for (std::size_t b = t.blocks.size(); b-- > 0;) {
      const std::size_t i = t.start + b;
      std::vector<Tensor> block_grads;
      if (grads) block_grads = slice_grads(*grads, i);
      grad_images = blocks_[i].backward(t.blocks[b], std::move(grad_images), grads ? &block_grads : nullptr, true);
      if (grads) store_grads(*grads, i, std::move(block_grads));
    }
    if (t.start != 0) return grad_images;
    // Split the block-0 input gradient into latent and embedding parts.
    const std::size_t batch = grad_images.dim(0);
    const std::size_t k = spec_.latent_dim, width = grad_images.dim(1);
    Tensor grad_z({batch, k});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < k; ++j) grad_z[b * k + j] = grad_images[b * width + j];
      if (grads && conditional()) {
        Tensor& ge = grads->back();
        const auto y = static_cast<std::size_t>(t.labels[b]);
        for (std::size_t j = 0; j < spec_.embed_dim; ++j) ge[y * spec_.embed_dim + j] += grad_images[b * width + k + j];
      }
    }
    return grad_z;
  }

  // Flat parameter list: every block's parameters in order, then the
  // embedding (when conditional).
  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& b : blocks_)
      for (auto& p : b.params()) out.push_back(&p);
    if (conditional()) out.push_back(&embedding_);
    return out;
  }

  std::vector<Tensor> zero_grads() const {
    std::vector<Tensor> g;
    for (const auto& b : blocks_)
      for (const auto& p : b.params()) g.push_back(Tensor::zeros_like(p));
    if (conditional()) g.push_back(Tensor::zeros_like(embedding_));
    return g;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      for (const auto& n : blocks_[i].param_names()) names.push_back("g" + std::to_string(i) + "." + n);
    if (conditional()) names.push_back("embedding");
    return names;
  }

  void check_feature(const FeatureVec& h) const {
    const Shape expected = feature_shape(h.layer, h.values.rank() ? h.values.dim(0) : 0);
    require(h.values.shape() == expected, ErrorKind::kShapeMismatch,
            "feature h_" + std::to_string(h.layer) + " expected " + shape_str(expected) + ", got " +
                shape_str(h.values.shape()));
  }

 private:
  Tensor block_input(const Tensor& z, std::span<const int> labels) const {
    if (!conditional()) return z;
    const std::size_t batch = z.dim(0), k = spec_.latent_dim, e = spec_.embed_dim;
    require(labels.size() == batch, ErrorKind::kShapeMismatch,
            "conditional generator needs " + std::to_string(batch) + " labels, got " + std::to_string(labels.size()));
    Tensor in({batch, k + e});
    for (std::size_t b = 0; b < batch; ++b) {
      const int y = labels[b];
      require(y >= 0 && static_cast<std::size_t>(y) < spec_.num_classes, ErrorKind::kOutOfRange,
              "generator label " + std::to_string(y) + " outside [0, " + std::to_string(spec_.num_classes) + ")");
      std::copy_n(z.data() + b * k, k, in.data() + b * (k + e));
      std::copy_n(embedding_.data() + static_cast<std::size_t>(y) * e, e, in.data() + b * (k + e) + k);
    }
    return in;
  }

  std::size_t grad_offset(std::size_t block) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < block; ++i) off += blocks_[i].params().size();
    return off;
  }

  std::vector<Tensor> slice_grads(std::vector<Tensor>& all, std::size_t block) const {
    const std::size_t off = grad_offset(block);
    std::vector<Tensor> out;
    for (std::size_t j = 0; j < blocks_[block].params().size(); ++j) out.push_back(std::move(all[off + j]));
    return out;
  }

  void store_grads(std::vector<Tensor>& all, std::size_t block, std::vector<Tensor> g) const {
    const std::size_t off = grad_offset(block);
    for (std::size_t j = 0; j < g.size(); ++j) all[off + j] = std::move(g[j]);
  }

  GeneratorSpec spec_;
  std::vector<Sequential> blocks_;
  Tensor embedding_;
};

inline GeneratorStack make_generator(const GeneratorSpec& spec, RngSeed seed) {
  GeneratorStack gen(spec);
  Rng rng(seed);
  gen.init(rng);
  return gen;
}

// Standard-normal latents for a batch.
inline Tensor sample_latents(const GeneratorStack& gen, std::size_t batch, Rng& rng) {
  return rng.normal_tensor({batch, gen.latent_dim()});
}

inline Checkpoint generator_to_checkpoint(const GeneratorStack& gen) {
  Checkpoint ckpt;
  auto names = gen.parameter_names();
  std::size_t n = 0;
  for (std::size_t i = 0; i < gen.num_blocks(); ++i)
    for (const auto& p : gen.block(i).params()) ckpt.tensors.push_back({names[n++], p});
  if (gen.conditional()) ckpt.tensors.push_back({names[n++], gen.embedding()});
  const auto& s = gen.spec();
  ckpt.metadata["kind"] = "generator";
  ckpt.metadata["architecture-id"] = "dcgen";
  ckpt.metadata["num-classes"] = std::to_string(s.num_classes);
  ckpt.metadata["input-shape"] = join_dims(s.image_shape);
  ckpt.metadata["latent-dim"] = std::to_string(s.latent_dim);
  ckpt.metadata["embed-dim"] = std::to_string(s.embed_dim);
  ckpt.metadata["blocks"] = std::to_string(gen.num_blocks());
  ckpt.metadata["channels"] = join_dims(s.channels);
  return ckpt;
}

inline GeneratorStack generator_from_checkpoint(const Checkpoint& ckpt) {
  require(ckpt.meta("architecture-id") == "dcgen", ErrorKind::kConfig,
          "unsupported generator architecture '" + ckpt.meta("architecture-id") + "'");
  GeneratorSpec spec;
  spec.num_classes = std::stoul(ckpt.meta("num-classes"));
  spec.image_shape = parse_dims(ckpt.meta("input-shape"));
  spec.latent_dim = std::stoul(ckpt.meta("latent-dim"));
  spec.embed_dim = std::stoul(ckpt.meta("embed-dim"));
  spec.channels = parse_dims(ckpt.meta("channels"));
  GeneratorStack gen(spec);
  require(std::stoul(ckpt.meta("blocks")) == gen.num_blocks(), ErrorKind::kConfig, "generator block count mismatch");
  auto names = gen.parameter_names();
  auto params = gen.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = ckpt.at(names[i]);
    check_same_shape(*params[i], t, names[i].c_str());
    *params[i] = t;
  }
  return gen;
}

}  // namespace glens
