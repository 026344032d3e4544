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
#include <span>
#include <string>
#include <vector>

#include "glens/core/checkpoint.hpp"
#include "glens/core/rng.hpp"
#include "glens/core/types.hpp"
#include "glens/models/layers.hpp"
#include "glens/models/sequential.hpp"

namespace glens {

// Image classifier whose last layer is a fully connected layer named "fc"
// fed by a non-negative (rectified or raw-pixel) representation.
struct Classifier {
  std::string architecture;
  std::size_t num_classes = 0;
  Shape input_shape;  // [C, H, W]
  std::size_t width = 1;
  Sequential net;

  static constexpr const char* kFcWeight = "fc.weight";
  static constexpr const char* kFcBias = "fc.bias";

  std::size_t feature_depth() const { return net.num_layers() - 1; }
  std::size_t feature_dim() const { return net.layer(net.num_layers() - 1).layer->param_specs()[0].shape[1]; }
};

namespace detail {

inline std::vector<NamedLayer> classifier_layers(const std::string& arch, const Shape& in, std::size_t classes,
                                                 std::size_t width) {
  const std::size_t c = in[0], h = in[1], w = in[2];
  const std::size_t pixels = c * h * w;
  if (arch == "linear") {
    return {{"flatten", flatten(pixels)}, {"fc", std::make_shared<Linear>(pixels, classes)}};
  }
  if (arch == "mlp2") {
    const std::size_t hidden = 64 * width;
    return {{"flatten", flatten(pixels)},
            {"fc1", std::make_shared<Linear>(pixels, hidden)},
            {"relu1", relu()},
            {"fc2", std::make_shared<Linear>(hidden, hidden)},
            {"relu2", relu()},
            {"fc", std::make_shared<Linear>(hidden, classes)}};
  }
  if (arch == "convnet4") {
    require(h % 8 == 0 && w % 8 == 0, ErrorKind::kInvalidArgument, "convnet4 needs H and W divisible by 8");
    const std::size_t c1 = 8 * width, c2 = 16 * width, c3 = 16 * width, c4 = 32 * width;
    const std::size_t features = c4 * (h / 8) * (w / 8);
    return {{"conv1", std::make_shared<Conv2d>(c, c1, 3, 1, 1)},
            {"relu1", relu()},
            {"conv2", std::make_shared<Conv2d>(c1, c2, 3, 2, 1)},
            {"relu2", relu()},
            {"conv3", std::make_shared<Conv2d>(c2, c3, 3, 2, 1)},
            {"relu3", relu()},
            {"conv4", std::make_shared<Conv2d>(c3, c4, 3, 2, 1)},
            {"relu4", relu()},
            {"flatten", flatten(features)},
            {"fc", std::make_shared<Linear>(features, classes)}};
  }
  fail(ErrorKind::kInvalidArgument, "unknown classifier architecture '" + arch + "'");
}

}  // namespace detail

// Builds an architecture ("linear", "mlp2", "convnet4") with freshly
// initialized parameters.
inline Classifier make_classifier(const std::string& arch, const Shape& input_shape, std::size_t num_classes,
                                  RngSeed seed, std::size_t width = 1) {
  require(input_shape.size() == 3, ErrorKind::kInvalidArgument, "input shape must be [C, H, W]");
  require(num_classes >= 2, ErrorKind::kInvalidArgument, "need at least two classes");
  Classifier model{arch, num_classes, input_shape, width,
                   Sequential(input_shape, detail::classifier_layers(arch, input_shape, num_classes, width))};
  Rng rng(seed);
  model.net.init(rng);
  return model;
}

inline void check_images(const Classifier& model, const Tensor& images) {
  require(images.rank() == 4 && Shape(images.shape().begin() + 1, images.shape().end()) == model.input_shape,
          ErrorKind::kShapeMismatch,
          "classifier expects images [B, " + shape_str(model.input_shape).substr(1) + ", got " +
              shape_str(images.shape()));
}

inline void check_labels(const Classifier& model, std::span<const int> labels, std::size_t batch) {
  require(labels.size() == batch, ErrorKind::kShapeMismatch,
          "expected " + std::to_string(batch) + " labels, got " + std::to_string(labels.size()));
  for (int y : labels)
    require(y >= 0 && static_cast<std::size_t>(y) < model.num_classes, ErrorKind::kOutOfRange,
            "label " + std::to_string(y) + " outside [0, " + std::to_string(model.num_classes) + ")");
}

inline Tensor classifier_forward(const Classifier& model, const Tensor& images) {
  check_images(model, images);
  return model.net.output(images);
}

inline Tensor classifier_forward(const Classifier& model, const ImageBatch& batch) {
  return classifier_forward(model, batch.pixels);
}

// Row-wise softmax of [B, L] logits, stabilized by the row max.
inline Tensor softmax(const Tensor& logits) {
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = logits[r * cols];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, static_cast<double>(logits[r * cols + c]));
    double sum = 0;
    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(logits[r * cols + c] - mx);
    for (std::size_t c = 0; c < cols; ++c) p[r * cols + c] = static_cast<Real>(std::exp(logits[r * cols + c] - mx) / sum);
  }
  return p;
}

struct CrossEntropy {
  double loss = 0;
  Tensor probs;
  Tensor grad;  // d loss / d logits
};

// Batch-mean cross-entropy from logits via log-sum-exp.
inline CrossEntropy cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  CrossEntropy ce;
  ce.probs = softmax(logits);
  ce.grad = ce.probs;
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = logits[r * cols];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, static_cast<double>(logits[r * cols + c]));
    double sum = 0;
    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(logits[r * cols + c] - mx);
    const auto y = static_cast<std::size_t>(labels[r]);
    ce.loss += mx + std::log(sum) - logits[r * cols + y];
    ce.grad[r * cols + y] -= 1;
  }
  ce.loss /= static_cast<double>(rows);
  for (auto& v : ce.grad.values()) v /= static_cast<Real>(rows);
  return ce;
}

// Tangent of the cross-entropy logit gradient for a logit tangent.
inline Tensor cross_entropy_grad_tangent(const Tensor& probs, const Tensor& logits_dot) {
  const std::size_t rows = probs.dim(0), cols = probs.dim(1);
  Tensor out(probs.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0;
    for (std::size_t c = 0; c < cols; ++c) mean += static_cast<double>(probs[r * cols + c]) * logits_dot[r * cols + c];
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] = static_cast<Real>(probs[r * cols + c] * (logits_dot[r * cols + c] - mean) / rows);
  }
  return out;
}

struct LossAndGradients {
  double loss = 0;
  GradientSet grads;
};

// Batch-averaged cross-entropy gradient w.r.t. every parameter leaf.
inline LossAndGradients loss_and_gradients(const Classifier& model, const Tensor& images,
                                           std::span<const int> labels) {
  check_images(model, images);
  check_labels(model, labels, images.dim(0));
  const Trace trace = model.net.forward(images);
  CrossEntropy ce = cross_entropy(trace.output(), labels);
  std::vector<Tensor> grads = model.net.zero_grads();
  model.net.backward(trace, ce.grad, &grads, false);
  return {ce.loss, model.net.to_gradient_set(std::move(grads))};
}

inline LossAndGradients loss_and_gradients(const Classifier& model, const ImageBatch& batch) {
  require(batch.labels.has_value(), ErrorKind::kInvalidArgument, "batch has no labels");
  return loss_and_gradients(model, batch.pixels, *batch.labels);
}

// Everything the gradient-matching objective needs from one evaluation of
// the classifier on a dummy batch.
struct DummyGradients {
  Trace trace;
  std::vector<Tensor> signals;
  Tensor probs;
  double loss = 0;
  GradientSet grads;
};

inline DummyGradients dummy_gradients(const Classifier& model, const Tensor& images, std::span<const int> labels) {
  check_images(model, images);
  check_labels(model, labels, images.dim(0));
  DummyGradients d;
  d.trace = model.net.forward(images);
  CrossEntropy ce = cross_entropy(d.trace.output(), labels);
  d.loss = ce.loss;
  d.probs = std::move(ce.probs);
  std::vector<Tensor> grads = model.net.zero_grads();
  model.net.backward(d.trace, ce.grad, &grads, false, &d.signals);
  d.grads = model.net.to_gradient_set(std::move(grads));
  return d;
}

// grad_x <direction, grad_params loss(x)>: the input gradient of any scalar
// function of the parameter gradients, given its gradient `direction` with
// respect to those parameter gradients.
inline Tensor parameter_gradient_vjp(const Classifier& model, const DummyGradients& d, const GradientSet& direction) {
  d.grads.check_layout(direction, "parameter_gradient_vjp");
  std::vector<Tensor> dirs;
  dirs.reserve(direction.size());
  for (const auto& e : direction.entries()) dirs.push_back(e.value);
  const std::vector<Tensor> dots = model.net.forward_tangents(d.trace, dirs);
  Tensor top = cross_entropy_grad_tangent(d.probs, dots.back());
  Tensor out = model.net.backward_tangent(d.trace, dots, d.signals, std::move(top), dirs);
  if (out.empty()) out = Tensor(d.trace.acts[0].shape());
  return out;
}

// Penultimate representation (input of the final fc layer), flattened to
// [B, feature_dim].
inline Tensor penultimate_features(const Classifier& model, const Tensor& images) {
  check_images(model, images);
  return model.net.forward(images, model.feature_depth()).output();
}

inline Checkpoint classifier_to_checkpoint(const Classifier& model) {
  Checkpoint ckpt;
  for (std::size_t i = 0; i < model.net.params().size(); ++i)
    ckpt.tensors.push_back({model.net.param_names()[i], model.net.params()[i]});
  ckpt.metadata["kind"] = "classifier";
  ckpt.metadata["architecture-id"] = model.architecture;
  ckpt.metadata["num-classes"] = std::to_string(model.num_classes);
  ckpt.metadata["input-shape"] = std::to_string(model.input_shape[0]) + "x" + std::to_string(model.input_shape[1]) +
                                 "x" + std::to_string(model.input_shape[2]);
  ckpt.metadata["width"] = std::to_string(model.width);
  return ckpt;
}

inline Classifier classifier_from_checkpoint(const Checkpoint& ckpt) {
  Classifier model = make_classifier(ckpt.meta("architecture-id"), parse_dims(ckpt.meta("input-shape")),
                                     std::stoul(ckpt.meta("num-classes")), RngSeed{0},
                                     ckpt.metadata.count("width") ? std::stoul(ckpt.meta("width")) : 1);
  auto& params = model.net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = ckpt.at(model.net.param_names()[i]);
    check_same_shape(params[i], t, model.net.param_names()[i].c_str());
    params[i] = t;
  }
  return model;
}

// Parameters as a gradient-shaped set (used for FedAvg deltas and
// parameter-space comparisons).
inline GradientSet parameters_of(const Classifier& model) { return model.net.to_gradient_set(model.net.params()); }

inline void set_parameters(Classifier& model, const GradientSet& params) {
  parameters_of(model).check_layout(params, "set_parameters");
  for (std::size_t i = 0; i < params.size(); ++i) model.net.params()[i] = params[i].value;
}

}  // namespace glens
