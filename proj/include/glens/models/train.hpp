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
#include <string>
#include <vector>

#include "glens/attacks/optim.hpp"
#include "glens/core/error.hpp"
#include "glens/core/rng.hpp"
#include "glens/data/dataset.hpp"
#include "glens/models/classifier.hpp"
#include "glens/models/generator.hpp"

namespace glens {

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0;
  double train_accuracy = 0;
  double val_accuracy = 0;
  double aux = 0;  // generator training: discriminator accuracy on real/fake
};

using TrainingLog = std::vector<EpochStats>;

inline double accuracy(const Classifier& model, const Dataset& data, std::size_t batch_size = 256) {
  if (data.size() == 0) return 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    const Tensor logits = classifier_forward(model, gather_rows(data.images, idx));
    const std::size_t cols = logits.dim(1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < cols; ++c)
        if (logits[r * cols + c] > logits[r * cols + best]) best = c;
      correct += static_cast<int>(best) == data.labels[idx[r]];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

struct ClassifierTrainConfig {
  std::string architecture = "convnet4";
  std::size_t width = 1;
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double lr = 0.05;
  double val_fraction = 0.1;
};

// Plain mini-batch SGD. The only state is the parameters themselves and the
// epoch index (each epoch shuffles with its own forked stream), so training
// can be resumed from a checkpoint bit-exactly.
inline void continue_training(Classifier& model, const Dataset& data, const ClassifierTrainConfig& cfg, RngSeed seed,
                              std::size_t start_epoch, std::size_t end_epoch, TrainingLog* log = nullptr) {
  require(data.size() > 0, ErrorKind::kInvalidArgument, "empty training set");
  Rng root(seed);
  std::vector<std::size_t> order = root.fork("split").permutation(data.size());
  const auto n_val = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(data.size()));
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  const Dataset val = data.subset(val_idx);

  for (std::size_t epoch = start_epoch; epoch < end_epoch; ++epoch) {
    Rng rng = root.fork(epoch + 1);
    std::vector<std::size_t> perm = train_idx;
    rng.shuffle(perm);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(perm.size(), start + cfg.batch_size);
      const std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                         perm.begin() + static_cast<std::ptrdiff_t>(end));
      ImageBatch batch = data.batch(idx);
      LossAndGradients lg = loss_and_gradients(model, batch.pixels, *batch.labels);
      if (!std::isfinite(lg.loss))
        fail(ErrorKind::kDivergence, "classifier loss became non-finite at epoch " + std::to_string(epoch));
      for (std::size_t i = 0; i < lg.grads.size(); ++i)
        axpy(static_cast<Real>(-cfg.lr), lg.grads[i].value, model.net.params()[i]);
      loss_sum += lg.loss;
      ++batches;
    }
    if (log) {
      EpochStats s;
      s.epoch = epoch;
      s.loss = batches ? loss_sum / static_cast<double>(batches) : 0;
      s.train_accuracy = accuracy(model, data.subset(train_idx));
      s.val_accuracy = accuracy(model, val);
      log->push_back(s);
    }
  }
}

inline Classifier train_classifier(const Dataset& data, const ClassifierTrainConfig& cfg, RngSeed seed,
                                   TrainingLog* log = nullptr) {
  require(data.size() > 0, ErrorKind::kInvalidArgument, "empty training set");
  Classifier model =
      make_classifier(cfg.architecture, data.image_shape(), data.num_classes, Rng(seed).fork("init").seed(), cfg.width);
  continue_training(model, data, cfg, seed, 0, cfg.epochs, log);
  return model;
}

struct GeneratorTrainConfig {
  GeneratorSpec spec;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double lr_generator = 2e-3;
  double lr_discriminator = 2e-3;
  double beta1 = 0.5;
  std::size_t disc_width = 16;
};

// Auxiliary-classifier discriminator: outputs [real/fake logit, class logits].
inline Sequential make_discriminator(const Shape& image_shape, std::size_t num_classes, std::size_t width,
                                     Rng& rng) {
  const std::size_t c = image_shape[0], side = image_shape[1];
  require(side % 8 == 0, ErrorKind::kInvalidArgument, "discriminator needs side divisible by 8");
  const std::size_t features = 4 * width * (side / 8) * (side / 8);
  Sequential d(image_shape, {{"conv1", std::make_shared<Conv2d>(c, width, 3, 2, 1)},
                             {"act1", std::make_shared<LeakyRelu>(Real(0.2))},
                             {"conv2", std::make_shared<Conv2d>(width, 2 * width, 3, 2, 1)},
                             {"act2", std::make_shared<LeakyRelu>(Real(0.2))},
                             {"conv3", std::make_shared<Conv2d>(2 * width, 4 * width, 3, 2, 1)},
                             {"act3", std::make_shared<LeakyRelu>(Real(0.2))},
                             {"flatten", flatten(features)},
                             {"head", std::make_shared<Linear>(features, 1 + num_classes)}});
  d.init(rng);
  return d;
}

namespace detail {

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct HeadLoss {
  double loss = 0;
  double correct_source = 0;  // fraction judged on the right side of 0
  Tensor grad;
};

// Non-saturating GAN loss on column 0 plus cross-entropy on the class
// columns, both averaged over the batch.
inline HeadLoss acgan_head_loss(const Tensor& out, std::span<const int> labels, bool target_real) {
  const std::size_t rows = out.dim(0), cols = out.dim(1), classes = cols - 1;
  HeadLoss h;
  h.grad = Tensor(out.shape());
  Tensor logits({rows, classes});
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = out[r * cols];
    h.loss += target_real ? softplus(-s) : softplus(s);
    h.grad[r * cols] = static_cast<Real>((sigmoid(s) - (target_real ? 1.0 : 0.0)) / static_cast<double>(rows));
    h.correct_source += (s > 0) == target_real;
    for (std::size_t c = 0; c < classes; ++c) logits[r * classes + c] = out[r * cols + 1 + c];
  }
  CrossEntropy ce = cross_entropy(logits, labels);
  h.loss = h.loss / static_cast<double>(rows) + ce.loss;
  h.correct_source /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < classes; ++c) h.grad[r * cols + 1 + c] = ce.grad[r * classes + c];
  return h;
}

}  // namespace detail

// Adversarial training of a conditional generator (AC-GAN objective) on a
// labeled dataset.
inline GeneratorStack train_generator(const Dataset& data, const GeneratorTrainConfig& cfg, RngSeed seed,
                                      TrainingLog* log = nullptr,
                                      const std::function<void(std::size_t, std::size_t)>& on_step = {}) {
  require(data.size() > 0, ErrorKind::kInvalidArgument, "empty training set");
  GeneratorSpec spec = cfg.spec;
  spec.image_shape = data.image_shape();
  spec.num_classes = data.num_classes;
  Rng root(seed);
  GeneratorStack gen = make_generator(spec, root.fork("generator-init").seed());
  Rng disc_rng = root.fork("discriminator-init");
  Sequential disc = make_discriminator(spec.image_shape, spec.num_classes, cfg.disc_width, disc_rng);

  AdamParams hp;
  hp.beta1 = cfg.beta1;
  Adam opt_d(cfg.lr_discriminator, hp);
  std::vector<AdamState> gen_states(gen.parameters().size());

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = root.fork(epoch + 1);
    std::vector<std::size_t> perm = rng.permutation(data.size());
    double g_loss_sum = 0, d_acc_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + cfg.batch_size <= perm.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                         perm.begin() + static_cast<std::ptrdiff_t>(start + cfg.batch_size));
      const ImageBatch real = data.batch(idx);
      const std::size_t b = idx.size();
      std::vector<int> fake_labels(b);
      for (auto& y : fake_labels) y = static_cast<int>(rng.uniform_index(spec.num_classes));
      const Tensor z = sample_latents(gen, b, rng);
      const auto fake_trace = gen.tail_trace({z, 0}, fake_labels);

      // Discriminator update on real and (fixed) fake samples.
      std::vector<Tensor> d_grads = disc.zero_grads();
      const Trace real_trace = disc.forward(real.pixels);
      const auto real_loss = detail::acgan_head_loss(real_trace.output(), *real.labels, true);
      disc.backward(real_trace, real_loss.grad, &d_grads, false);
      const Trace fake_d_trace = disc.forward(fake_trace.images());
      const auto fake_loss = detail::acgan_head_loss(fake_d_trace.output(), fake_labels, false);
      disc.backward(fake_d_trace, fake_loss.grad, &d_grads, false);
      opt_d.step(disc.params(), d_grads);

      // Generator update through the updated discriminator.
      const Trace g_trace = disc.forward(fake_trace.images());
      const auto g_loss = detail::acgan_head_loss(g_trace.output(), fake_labels, true);
      const Tensor grad_images = disc.backward(g_trace, g_loss.grad, nullptr, true);
      std::vector<Tensor> g_grads = gen.zero_grads();
      gen.tail_backward(fake_trace, grad_images, &g_grads);
      auto params = gen.parameters();
      for (std::size_t i = 0; i < params.size(); ++i)
        adam_step(gen_states[i], *params[i], g_grads[i], cfg.lr_generator, hp);

      if (!std::isfinite(real_loss.loss) || !std::isfinite(fake_loss.loss) || !std::isfinite(g_loss.loss))
        fail(ErrorKind::kDivergence, "GAN loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                                         std::to_string(step));
      g_loss_sum += g_loss.loss;
      d_acc_sum += 0.5 * (real_loss.correct_source + fake_loss.correct_source);
      ++batches;
      ++step;
      if (on_step) on_step(epoch, step);
    }
    if (log) {
      EpochStats s;
      s.epoch = epoch;
      s.loss = batches ? g_loss_sum / static_cast<double>(batches) : 0;
      s.aux = batches ? d_acc_sum / static_cast<double>(batches) : 0;
      log->push_back(s);
    }
  }
  return gen;
}

}  // namespace glens
