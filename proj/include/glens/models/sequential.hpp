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

#include <string>
#include <utility>
#include <vector>

#include "glens/core/rng.hpp"
#include "glens/core/types.hpp"
#include "glens/models/layers.hpp"

namespace glens {

struct NamedLayer {
  std::string name;
  LayerPtr layer;
};

// Activations of one forward pass: acts[0] is the input, acts[l + 1] the
// output of layer l.
struct Trace {
  std::vector<Tensor> acts;
  const Tensor& output() const { return acts.back(); }
};

// A chain of layers plus the flat list of their parameters. Parameter leaves
// are named "<layer>.<param>", in layer order.
class Sequential {
 public:
  Sequential() = default;

  // `sample_shape` excludes the batch axis.
  Sequential(Shape sample_shape, std::vector<NamedLayer> layers)
      : sample_shape_(std::move(sample_shape)), layers_(std::move(layers)) {
    Shape shape = sample_shape_;
    shape.insert(shape.begin(), 1);
    for (const auto& [name, layer] : layers_) {
      offsets_.push_back(params_.size());
      for (const auto& spec : layer->param_specs()) {
        names_.push_back(name + "." + spec.name);
        params_.emplace_back(spec.shape);
      }
      shape = layer->output_shape(shape);
    }
    offsets_.push_back(params_.size());
    out_sample_shape_.assign(shape.begin() + 1, shape.end());
  }

  void init(Rng& rng) {
    for (std::size_t l = 0; l < layers_.size(); ++l)
      layers_[l].layer->init_params(GradView(params_.data() + offsets_[l], offsets_[l + 1] - offsets_[l]), rng);
  }

  const Shape& sample_shape() const { return sample_shape_; }
  const Shape& output_sample_shape() const { return out_sample_shape_; }
  std::size_t num_layers() const { return layers_.size(); }
  const NamedLayer& layer(std::size_t l) const { return layers_[l]; }

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<std::string>& param_names() const { return names_; }

  std::size_t param_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t param_count(std::size_t layer) const { return offsets_[layer + 1] - offsets_[layer]; }

  ParamView layer_params(std::size_t l) const { return ParamView(params_.data() + offsets_[l], param_count(l)); }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  Shape batch_input_shape(std::size_t batch) const {
    Shape s = sample_shape_;
    s.insert(s.begin(), batch);
    return s;
  }

  void check_input(const Tensor& x) const {
    require(x.rank() == sample_shape_.size() + 1 &&
                std::equal(sample_shape_.begin(), sample_shape_.end(), x.shape().begin() + 1),
            ErrorKind::kShapeMismatch,
            "input shape mismatch: expected " + shape_str(batch_input_shape(x.rank() ? x.dim(0) : 0)) + ", got " +
                shape_str(x.shape()));
  }

  // Runs the first `depth` layers (all by default). Traces always start at
  // layer 0, so backward passes can index parameters directly.
  Trace forward(const Tensor& x, std::size_t depth = SIZE_MAX) const {
    depth = std::min(depth, layers_.size());
    Trace trace;
    trace.acts.reserve(depth + 1);
    trace.acts.push_back(x);
    for (std::size_t l = 0; l < depth; ++l)
      trace.acts.push_back(layers_[l].layer->forward(trace.acts.back(), layer_params(l)));
    return trace;
  }

  Tensor output(const Tensor& x) const { return forward(x).output(); }

  // Back-propagates `grad_out` from the output of the trace. Parameter
  // gradients are accumulated into `grads` when it is non-null (one tensor
  // per leaf, pre-sized). When `signals` is non-null, signals[l] receives the
  // gradient w.r.t. the output of layer l.
  Tensor backward(const Trace& trace, Tensor grad_out, std::vector<Tensor>* grads, bool need_input_grad,
                  std::vector<Tensor>* signals = nullptr) const {
    const std::size_t n = trace.acts.size() - 1;
    if (signals) signals->assign(n, Tensor());
    for (std::size_t l = n; l-- > 0;) {
      if (signals) (*signals)[l] = grad_out;
      GradView g = grads ? GradView(grads->data() + offsets_[l], param_count(l)) : GradView();
      const bool want_input = need_input_grad || l > 0;
      grad_out = layers_[l].layer->backward(trace.acts[l], trace.acts[l + 1], grad_out, layer_params(l), g, want_input);
    }
    return grad_out;
  }

  // Forward tangents for parameter direction `dirs` (one tensor per leaf;
  // an empty vector means no parameter tangent) and input tangent `x_dot`.
  std::vector<Tensor> forward_tangents(const Trace& trace, const std::vector<Tensor>& dirs,
                                       Tensor x_dot = Tensor()) const {
    const std::size_t n = trace.acts.size() - 1;
    std::vector<Tensor> dots(n + 1);
    dots[0] = std::move(x_dot);
    for (std::size_t l = 0; l < n; ++l)
      dots[l + 1] = layers_[l].layer->forward_tangent(trace.acts[l], dots[l], layer_params(l), dir_view(dirs, l));
    return dots;
  }

  // Tangent of the input gradient of backward(), given the forward tangents,
  // the primal backward signals, and the tangent of the top gradient.
  Tensor backward_tangent(const Trace& trace, const std::vector<Tensor>& dots, const std::vector<Tensor>& signals,
                          Tensor grad_out_dot, const std::vector<Tensor>& dirs) const {
    const std::size_t n = trace.acts.size() - 1;
    for (std::size_t l = n; l-- > 0;) {
      const Layer& layer = *layers_[l].layer;
      require(layer.piecewise_linear() || dots[l].empty(), ErrorKind::kInvalidArgument,
              "tangent backward through smooth nonlinearity '" + layer.kind() + "' is not supported");
      grad_out_dot = layer.backward_tangent(trace.acts[l], dots[l], signals[l], grad_out_dot, layer_params(l),
                                            dir_view(dirs, l));
    }
    return grad_out_dot;
  }

  std::vector<Tensor> zero_grads() const {
    std::vector<Tensor> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.push_back(Tensor::zeros_like(p));
    return g;
  }

  GradientSet to_gradient_set(std::vector<Tensor> grads, const std::string& prefix = "") const {
    std::vector<NamedTensor> entries;
    for (std::size_t i = 0; i < grads.size(); ++i) entries.push_back({prefix + names_[i], std::move(grads[i])});
    return GradientSet(std::move(entries));
  }

 private:
  ParamView dir_view(const std::vector<Tensor>& dirs, std::size_t l) const {
    if (dirs.empty()) return {};
    return ParamView(dirs.data() + offsets_[l], param_count(l));
  }

  Shape sample_shape_;
  Shape out_sample_shape_;
  std::vector<NamedLayer> layers_;
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
  std::vector<std::size_t> offsets_;
};

}  // namespace glens
