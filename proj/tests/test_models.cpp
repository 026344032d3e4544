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
#include <gtest/gtest.h>

#include <cstdlib>

#include "glens/glens.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

namespace glens {
namespace {

using testing::check_gradient;
using testing::rel_err;

std::vector<Tensor> random_params(const Layer& layer, Rng& rng) {
  std::vector<Tensor> p;
  for (const auto& s : layer.param_specs()) p.push_back(rng.normal_tensor(s.shape, 0.3));
  return p;
}

Tensor or_zeros(const Tensor& t, const Shape& shape) { return t.empty() ? Tensor(shape) : t; }

struct LayerCase {
  std::string name;
  LayerPtr layer;
  Shape in;
};

std::vector<LayerCase> layer_cases() {
  return {{"conv_s1", std::make_shared<Conv2d>(2, 3, 3, 1, 1), {2, 2, 6, 6}},
          {"conv_s2", std::make_shared<Conv2d>(2, 4, 3, 2, 1), {2, 2, 8, 8}},
          {"conv_nopad", std::make_shared<Conv2d>(1, 2, 3, 1, 0), {1, 1, 5, 5}},
          {"linear", std::make_shared<Linear>(7, 5), {3, 7}},
          {"linear_nobias", std::make_shared<Linear>(4, 3, false), {2, 4}},
          {"relu", relu(), {2, 10}},
          {"leaky", std::make_shared<LeakyRelu>(Real(0.2)), {2, 3, 4, 4}},
          {"reshape", std::make_shared<Reshape>(Shape{2, 3}), {4, 6}},
          {"upsample", std::make_shared<Upsample2x>(), {2, 3, 3, 3}},
          {"sigmoid", std::make_shared<Sigmoid>(), {2, 9}}};
}

TEST(Layers, InputGradientsMatchFiniteDifferences) {
  Rng rng(RngSeed{1});
  for (const auto& c : layer_cases()) {
    const auto params = random_params(*c.layer, rng);
    const Tensor x = rng.normal_tensor(c.in);
    const Tensor w = rng.normal_tensor(c.layer->output_shape(c.in));
    const Tensor out = c.layer->forward(x, params);
    const Tensor grad = c.layer->backward(x, out, w, params, {}, true);
    auto f = [&](const Tensor& xi) { return dot(w, c.layer->forward(xi, params)); };
    const auto s = check_gradient(f, x, grad, rng, 20);
    EXPECT_EQ(s.probes, 20u) << c.name;
    EXPECT_LT(s.max_rel, 1e-2) << c.name;
  }
}

TEST(Layers, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(RngSeed{2});
  for (const auto& c : layer_cases()) {
    auto params = random_params(*c.layer, rng);
    if (params.empty()) continue;
    const Tensor x = rng.normal_tensor(c.in);
    const Tensor w = rng.normal_tensor(c.layer->output_shape(c.in));
    const Tensor out = c.layer->forward(x, params);
    std::vector<Tensor> grads;
    for (const auto& p : params) grads.push_back(Tensor::zeros_like(p));
    c.layer->backward(x, out, w, params, grads, false);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto f = [&](const Tensor& pk) {
        auto q = params;
        q[k] = pk;
        return dot(w, c.layer->forward(x, q));
      };
      const auto s = check_gradient(f, params[k], grads[k], rng, 20);
      EXPECT_EQ(s.probes, 20u) << c.name << " leaf " << k;
      EXPECT_LT(s.max_rel, 1e-2) << c.name << " leaf " << k;
    }
  }
}

// Central difference of a tensor-valued function of a scalar step s.
Tensor step_fd(const std::function<Tensor(double)>& F, double eps) {
  Tensor fd = sub(F(eps), F(-eps));
  for (auto& v : fd.values()) v = static_cast<Real>(v / (2 * eps));
  return fd;
}

double vec_err(const Tensor& a, const Tensor& b) {
  return l2_norm(sub(a, b)) / std::max({l2_norm(a), l2_norm(b), 1e-6});
}

std::vector<Tensor> shifted(const std::vector<Tensor>& p, const std::vector<Tensor>& d, double s) {
  auto q = p;
  for (std::size_t i = 0; i < q.size(); ++i) axpy(static_cast<Real>(s), d[i], q[i]);
  return q;
}

TEST(Layers, TangentPassesMatchFiniteDifferences) {
  Rng rng(RngSeed{3});
  for (const auto& c : layer_cases()) {
    if (!c.layer->piecewise_linear()) continue;
    // Upsampling only appears in generators, which need no second-order pass.
    const bool second_order = c.name != "upsample";
    const auto params = random_params(*c.layer, rng);
    const Shape out_shape = c.layer->output_shape(c.in);
    int checked = 0;
    for (int probe = 0; probe < 40 && checked < 20; ++probe) {
      const Tensor x = rng.normal_tensor(c.in), xd = rng.normal_tensor(c.in);
      const Tensor g = rng.normal_tensor(out_shape), gd = rng.normal_tensor(out_shape);
      std::vector<Tensor> pd;
      for (const auto& p : params) pd.push_back(rng.normal_tensor(p.shape()));
      auto fwd = [&](double s) {
        Tensor xs = x;
        axpy(static_cast<Real>(s), xd, xs);
        return c.layer->forward(xs, shifted(params, pd, s));
      };
      auto bwd = [&](double s) {
        Tensor xs = x, gs = g;
        axpy(static_cast<Real>(s), xd, xs);
        axpy(static_cast<Real>(s), gd, gs);
        const auto ps = shifted(params, pd, s);
        return c.layer->backward(xs, c.layer->forward(xs, ps), gs, ps, {}, true);
      };
      // Skip probes whose stencil crosses a kink.
      if (vec_err(step_fd(fwd, 1e-3), step_fd(fwd, 5e-4)) > 1e-2) continue;
      if (second_order && vec_err(step_fd(bwd, 1e-3), step_fd(bwd, 5e-4)) > 1e-2) continue;
      const Tensor ft = or_zeros(c.layer->forward_tangent(x, xd, params, pd), out_shape);
      EXPECT_LT(vec_err(step_fd(fwd, 1e-3), ft), 1e-2) << c.name;
      if (second_order) {
        const Tensor bt = or_zeros(c.layer->backward_tangent(x, xd, g, gd, params, pd), c.in);
        EXPECT_LT(vec_err(step_fd(bwd, 1e-3), bt), 1e-2) << c.name;
      }
      ++checked;
    }
    EXPECT_EQ(checked, 20) << c.name;
  }
}

TEST(Classifier, ZeroWeightsGiveZeroLogits) {
  for (const std::string arch : {"linear", "mlp2", "convnet4"}) {
    Classifier m = make_classifier(arch, {1, 8, 8}, 4, RngSeed{1});
    for (auto& p : m.net.params()) p.fill(0);
    Rng rng(RngSeed{2});
    const Tensor logits = classifier_forward(m, rng.uniform_tensor({3, 1, 8, 8}));
    EXPECT_EQ(logits, Tensor({3, 4})) << arch;
  }
}

TEST(Classifier, MatchesScalarLoopOracle) {
  Classifier m = make_classifier("mlp2", {1, 2, 3}, 3, RngSeed{9});
  Rng rng(RngSeed{10});
  const Tensor x = rng.uniform_tensor({2, 1, 2, 3});
  const Tensor logits = classifier_forward(m, x);
  const auto& p = m.net.params();  // fc1.w, fc1.b, fc2.w, fc2.b, fc.w, fc.b
  auto dense = [](const std::vector<double>& in, const Tensor& w, const Tensor& b, bool rectify) {
    const std::size_t out = w.dim(0), n = w.dim(1);
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(w[o * n + i]) * in[i];
      y[o] = rectify ? std::max(acc, 0.0) : acc;
    }
    return y;
  };
  for (std::size_t s = 0; s < 2; ++s) {
    std::vector<double> in(6);
    for (std::size_t i = 0; i < 6; ++i) in[i] = x[s * 6 + i];
    const auto h1 = dense(in, p[0], p[1], true);
    const auto h2 = dense(h1, p[2], p[3], true);
    const auto out = dense(h2, p[4], p[5], false);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(logits[s * 3 + c], out[c], 1e-5);
  }
}

TEST(Classifier, IdenticalImagesGiveIdenticalRows) {
  Classifier m = make_classifier("convnet4", {1, 8, 8}, 5, RngSeed{4});
  Rng rng(RngSeed{5});
  const Tensor one = rng.uniform_tensor({1, 1, 8, 8});
  const Tensor batch = concat_rows(concat_rows(one, one), one);
  const Tensor logits = classifier_forward(m, batch);
  for (std::size_t r = 1; r < 3; ++r)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(logits[r * 5 + c], logits[c]);
}

TEST(Classifier, ShapeMismatchNamesBothShapes) {
  Classifier m = make_classifier("mlp2", {1, 4, 4}, 3, RngSeed{1});
  try {
    classifier_forward(m, Tensor({1, 1, 5, 4}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShapeMismatch);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("4, 4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[1, 1, 5, 4]"), std::string::npos) << msg;
  }
}

TEST(Classifier, PenultimateIsNonNegative) {
  Rng rng(RngSeed{6});
  for (const std::string arch : {"linear", "mlp2", "convnet4"}) {
    Classifier m = make_classifier(arch, {1, 8, 8}, 4, RngSeed{7});
    const Tensor feats = penultimate_features(m, rng.uniform_tensor({8, 1, 8, 8}));
    for (Real v : feats.values()) EXPECT_GE(v, 0) << arch;
    EXPECT_EQ(feats.dim(1), m.feature_dim());
    EXPECT_EQ(m.net.param_names()[m.net.params().size() - 2], Classifier::kFcWeight);
  }
}

TEST(LossAndGradients, LinearTwoClassClosedForm) {
  Classifier m = make_classifier("linear", {1, 2, 2}, 2, RngSeed{3});
  Rng rng(RngSeed{4});
  const Tensor x = rng.uniform_tensor({1, 1, 2, 2});
  const std::vector<int> y{1};
  const auto lg = loss_and_gradients(m, x, y);
  const Tensor& w = m.net.params()[0];
  const Tensor& b = m.net.params()[1];
  double z[2];
  for (int c = 0; c < 2; ++c) {
    z[c] = b[c];
    for (int i = 0; i < 4; ++i) z[c] += static_cast<double>(w[c * 4 + i]) * x[i];
  }
  const double p1 = 1.0 / (1.0 + std::exp(z[0] - z[1]));
  const double p[2] = {1 - p1, p1};
  EXPECT_NEAR(lg.loss, -std::log(p1), 1e-6);
  for (int c = 0; c < 2; ++c) {
    const double r = p[c] - (c == 1 ? 1.0 : 0.0);
    EXPECT_NEAR(lg.grads.at("fc.bias")[c], r, 1e-6);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(lg.grads.at("fc.weight")[c * 4 + i], r * x[i], 1e-6);
  }
}

TEST(LossAndGradients, EveryLeafMatchesFiniteDifferences) {
  Rng rng(RngSeed{5});
  for (const std::string arch : {"mlp2", "convnet4"}) {
    Classifier m = make_classifier(arch, {1, 8, 8}, 4, RngSeed{6});
    const Tensor x = rng.uniform_tensor({2, 1, 8, 8});
    const std::vector<int> y{1, 3};
    const auto lg = loss_and_gradients(m, x, y);
    for (std::size_t k = 0; k < lg.grads.size(); ++k) {
      auto f = [&](const Tensor& pk) {
        Classifier q = m;
        q.net.params()[k] = pk;
        return loss_and_gradients(q, x, y).loss;
      };
      const auto s = check_gradient(f, m.net.params()[k], lg.grads[k].value, rng, 20, 1e-4);
      EXPECT_EQ(s.probes, 20u) << arch << " " << lg.grads[k].name;
      EXPECT_LT(s.max_rel, 1e-2) << arch << " " << lg.grads[k].name;
    }
  }
}

TEST(LossAndGradients, DuplicatedBatchAveragesIdentically) {
  Classifier m = make_classifier("convnet4", {1, 8, 8}, 4, RngSeed{8});
  Rng rng(RngSeed{9});
  const Tensor x = rng.uniform_tensor({2, 1, 8, 8});
  const std::vector<int> y{0, 2}, yy{0, 2, 0, 2};
  const auto a = loss_and_gradients(m, x, y);
  const auto b = loss_and_gradients(m, concat_rows(x, x), yy);
  EXPECT_NEAR(a.loss, b.loss, 1e-6);
  for (std::size_t k = 0; k < a.grads.size(); ++k)
    for (std::size_t i = 0; i < a.grads[k].value.size(); ++i)
      EXPECT_NEAR(a.grads[k].value[i], b.grads[k].value[i], 1e-6);
}

TEST(LossAndGradients, LabelOutOfRangeIsAnError) {
  Classifier m = make_classifier("linear", {1, 2, 2}, 3, RngSeed{1});
  const std::vector<int> bad{3};
  EXPECT_THROW(loss_and_gradients(m, Tensor({1, 1, 2, 2}), bad), Error);
  const std::vector<int> negative{-1};
  EXPECT_THROW(loss_and_gradients(m, Tensor({1, 1, 2, 2}), negative), Error);
}

TEST(CrossEntropy, LogitGradientMatchesFiniteDifferences) {
  Rng rng(RngSeed{10});
  const Tensor logits = rng.normal_tensor({3, 5}, 2.0);
  const std::vector<int> y{4, 0, 2};
  const auto ce = cross_entropy(logits, y);
  const auto s = check_gradient([&](const Tensor& z) { return cross_entropy(z, y).loss; }, logits, ce.grad, rng, 20);
  EXPECT_LT(s.max_rel, 1e-2);
  const Tensor big = Tensor({1, 2}, std::vector<Real>{1000, -1000});
  const std::vector<int> y0{0};
  EXPECT_TRUE(std::isfinite(cross_entropy(big, y0).loss));
}

TEST(SecondOrder, ParameterGradientVjpMatchesFiniteDifferences) {
  Rng rng(RngSeed{11});
  for (const std::string arch : {"linear", "mlp2", "convnet4"}) {
    Classifier m = make_classifier(arch, {1, 8, 8}, 4, RngSeed{12});
    const Tensor x = rng.uniform_tensor({2, 1, 8, 8});
    const std::vector<int> y{2, 1};
    const auto d = dummy_gradients(m, x, y);
    GradientSet dir = GradientSet::zeros_like(d.grads);
    for (auto& e : dir.entries()) e.value = rng.normal_tensor(e.value.shape());
    const Tensor grad = parameter_gradient_vjp(m, d, dir);
    auto f = [&](const Tensor& xi) { return dot(dir, loss_and_gradients(m, xi, y).grads); };
    const auto s = check_gradient(f, x, grad, rng, 20, 1e-4);
    EXPECT_EQ(s.probes, 20u) << arch;
    EXPECT_LT(s.max_rel, 1e-2) << arch;
  }
}

TEST(InputGradient, AnalyticFunctionals) {
  Rng rng(RngSeed{13});
  const Tensor x = rng.normal_tensor({3, 4});
  const Tensor a = rng.normal_tensor({3, 4});
  const LossFunctional half_sq = [](const Tensor& v) { return ValueAndGrad{0.5 * squared_norm(v), v}; };
  const LossFunctional linear = [&](const Tensor& v) { return ValueAndGrad{dot(a, v), a}; };
  EXPECT_EQ(input_gradient(half_sq, x), x);
  EXPECT_EQ(input_gradient(linear, x), a);
  const LossFunctional wrong = [](const Tensor&) { return ValueAndGrad{0, Tensor({1})}; };
  EXPECT_THROW(input_gradient(wrong, x), Error);
}

GeneratorStack small_generator(std::uint64_t seed) {
  GeneratorSpec spec;
  spec.image_shape = {1, 16, 16};
  spec.channels = {8, 6, 4};
  spec.latent_dim = 6;
  spec.embed_dim = 3;
  spec.num_classes = 4;
  return make_generator(spec, RngSeed{seed});
}

// Generator outputs pass through a sigmoid and are summed over every pixel in
// float32, so the finite differences here carry about 1% rounding noise.
TEST(InputGradient, GeneratorThroughClassifierCoordinates) {
  const GeneratorStack gen = small_generator(3);
  Classifier m = make_classifier("convnet4", {1, 16, 16}, 4, RngSeed{4});
  Rng rng(RngSeed{5});
  const std::vector<int> y{1};
  const Tensor target = gen.generate(sample_latents(gen, 1, rng), y);
  const GradientSet observed = loss_and_gradients(m, target, y).grads;
  AttackContext ctx;
  ctx.model = m;
  ctx.observed = observed;
  ctx.labels = y;
  ctx.gen_labels = y;
  ctx.batch = 1;
  for (std::size_t layer = 0; layer <= gen.depth(); ++layer) {
    const Tensor h = gen.head(sample_latents(gen, 1, rng), y, layer).values;
    const LossFunctional f = tail_functional(gen, layer, ctx);
    const Tensor grad = input_gradient(f, h);
    const double scale = max_abs(grad);
    int checked = 0;
    for (int attempt = 0; attempt < 200 && checked < 20; ++attempt) {
      const std::size_t j = rng.uniform_index(h.size());
      auto fd = [&](double eps) {
        Tensor hp = h, hm = h;
        hp[j] += static_cast<Real>(eps);
        hm[j] -= static_cast<Real>(eps);
        return (f(hp).value - f(hm).value) / (2 * eps);
      };
      const double a = fd(1e-3), b = fd(5e-4);
      if (rel_err(a, b, 1e-2 * scale) > 2e-3) continue;
      EXPECT_LT(rel_err(grad[j], a, 1e-2 * scale), 2e-2) << "layer " << layer << " coord " << j;
      ++checked;
    }
    EXPECT_EQ(checked, 20) << "layer " << layer;
  }
}

TEST(Generator, SplitComposeIsExact) {
  const GeneratorStack gen = small_generator(7);
  Rng rng(RngSeed{8});
  const std::vector<int> y{0, 3};
  const Tensor z = sample_latents(gen, 2, rng);
  const Tensor full = gen.generate(z, y);
  EXPECT_EQ(gen.tail({z, 0}, y), full);
  for (std::size_t i = 0; i <= gen.depth(); ++i) {
    const FeatureVec h = gen.head(z, y, i);
    EXPECT_EQ(h.values.shape(), gen.feature_shape(i, 2));
    const Tensor out = gen.tail(h, y);
    for (std::size_t k = 0; k < out.size(); ++k) ASSERT_NEAR(out[k], full[k], 1e-6) << "i=" << i;
  }
  for (Real v : full.values()) {
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 1);
  }
}

TEST(Generator, FeatureDimensionGrowsTowardOutput) {
  const GeneratorStack& gen = testing::shapes_generator();
  std::size_t prev = 0;
  for (std::size_t i = 1; i <= gen.depth(); ++i) {
    const std::size_t n = shape_size(gen.feature_shape(i, 1));
    EXPECT_GT(n, prev);
    prev = n;
  }
}

TEST(Generator, LayerIndexOutOfRange) {
  const GeneratorStack gen = small_generator(1);
  EXPECT_THROW(gen.feature_shape(gen.depth() + 1, 1), Error);
  const std::vector<int> y{0};
  EXPECT_THROW(gen.tail({Tensor(gen.feature_shape(2, 1)), 1}, y), Error);
  const std::vector<int> bad{9};
  Rng rng(RngSeed{1});
  EXPECT_THROW(gen.generate(sample_latents(gen, 1, rng), bad), Error);
}

// Same float32 noise budget as the generator-through-classifier check.
TEST(Generator, TailBackwardMatchesFiniteDifferences) {
  const GeneratorStack gen = small_generator(11);
  Rng rng(RngSeed{12});
  const std::vector<int> y{2};
  for (std::size_t layer = 0; layer <= gen.depth(); ++layer) {
    const Tensor h = gen.head(sample_latents(gen, 1, rng), y, layer).values;
    const Tensor w = rng.normal_tensor({1, 1, 16, 16});
    const auto trace = gen.tail_trace({h, layer}, y);
    std::vector<Tensor> pgrads = gen.zero_grads();
    const Tensor grad = gen.tail_backward(trace, w, &pgrads);
    auto f = [&](const Tensor& hi) { return dot(w, gen.tail({hi, layer}, y)); };
    const auto s = check_gradient(f, h, grad, rng, 20);
    EXPECT_EQ(s.probes, 20u) << "layer " << layer;
    EXPECT_LT(s.max_rel, 1e-2) << "layer " << layer;
    if (layer != 0) continue;
    GeneratorStack g2 = gen;
    const auto names = gen.parameter_names();
    for (std::size_t k = 0; k < pgrads.size(); ++k) {
      auto fp = [&](const Tensor& pk) {
        GeneratorStack q = gen;
        *q.parameters()[k] = pk;
        return dot(w, q.tail({h, 0}, y));
      };
      const auto sp = check_gradient(fp, *g2.parameters()[k], pgrads[k], rng, 20);
      EXPECT_LT(sp.max_rel, 2e-2) << names[k];
    }
  }
}

TEST(Generator, GoldenTailAtLayerTwo) {
  const GeneratorStack gen = make_generator(GeneratorSpec{}, RngSeed{2024});
  Rng rng(RngSeed{7});
  const std::vector<int> y{3, 8};
  const FeatureVec h2 = gen.head(sample_latents(gen, 2, rng), y, 2);
  const Tensor out = gen.tail(h2, y);
  const auto path = testing::golden_dir() / "generator_tail_i2.glns";
  if (std::getenv("GLENS_UPDATE_GOLDEN")) save_checkpoint(Checkpoint{kCheckpointVersion, {{"images", out}}, {}}, path);
  const Tensor golden = load_checkpoint(path).at("images");
  ASSERT_EQ(golden.shape(), out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], golden[i], 1e-6);
}

TEST(Generator, CheckpointRoundTripAndMetadata) {
  const GeneratorStack gen = small_generator(5);
  const Checkpoint ckpt = generator_to_checkpoint(gen);
  for (const char* key : {"architecture-id", "num-classes", "input-shape", "latent-dim", "blocks"})
    EXPECT_TRUE(ckpt.metadata.count(key)) << key;
  const GeneratorStack back = generator_from_checkpoint(decode_checkpoint(encode_checkpoint(ckpt)));
  Rng rng(RngSeed{1});
  const std::vector<int> y{1};
  const Tensor z = sample_latents(gen, 1, rng);
  EXPECT_EQ(back.generate(z, y), gen.generate(z, y));
}

TEST(Classifier, CheckpointRoundTripAndMetadata) {
  const Classifier m = make_classifier("convnet4", {3, 16, 16}, 7, RngSeed{2}, 2);
  const Checkpoint ckpt = classifier_to_checkpoint(m);
  for (const char* key : {"architecture-id", "num-classes", "input-shape"}) EXPECT_TRUE(ckpt.metadata.count(key));
  const Classifier back = classifier_from_checkpoint(decode_checkpoint(encode_checkpoint(ckpt)));
  EXPECT_EQ(back.net.params(), m.net.params());
  EXPECT_EQ(back.width, 2u);
}

Dataset tiny_shapes(std::size_t n, std::uint64_t seed) {
  Dataset d = make_shapes_dataset(n, RngSeed{seed}, 1, 16);
  return d;
}

TEST(TrainGenerator, OneStepChangesParameters) {
  const Dataset data = tiny_shapes(32, 1);
  GeneratorTrainConfig cfg;
  cfg.spec.channels = {8, 8, 4};
  cfg.epochs = 1;
  std::size_t steps = 0;
  const GeneratorStack trained = train_generator(data, cfg, RngSeed{3}, nullptr, [&](std::size_t, std::size_t) { ++steps; });
  EXPECT_EQ(steps, 1u);
  GeneratorSpec spec = cfg.spec;
  spec.image_shape = data.image_shape();
  spec.num_classes = data.num_classes;
  GeneratorStack init = make_generator(spec, Rng(RngSeed{3}).fork("generator-init").seed());
  double delta = 0;
  auto a = init.parameters();
  auto b = const_cast<GeneratorStack&>(trained).parameters();
  for (std::size_t i = 0; i < a.size(); ++i) delta += squared_norm(sub(*a[i], *b[i]));
  EXPECT_GT(delta, 0);
}

TEST(TrainGenerator, SameSeedSameParameters) {
  const Dataset data = tiny_shapes(64, 2);
  GeneratorTrainConfig cfg;
  cfg.spec.channels = {8, 8, 4};
  cfg.epochs = 1;
  GeneratorStack a = train_generator(data, cfg, RngSeed{4});
  GeneratorStack b = train_generator(data, cfg, RngSeed{4});
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
}

double pixel_variance(const Tensor& images) {
  double sum = 0, sq = 0;
  for (Real v : images.values()) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(images.size());
  return sq / n - (sum / n) * (sum / n);
}

TEST(TrainGenerator, TrainedSamplesMatchDataVariance) {
  const GeneratorStack& gen = testing::shapes_generator();
  const Dataset real = testing::generator_training_data();
  Rng rng(RngSeed{21});
  std::vector<int> labels(1000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  const Tensor fake = gen.generate(sample_latents(gen, labels.size(), rng), labels);
  const double ratio = pixel_variance(fake) / pixel_variance(real.images);
  EXPECT_GE(ratio, 0.5);
  EXPECT_LE(ratio, 2.0);
}

TEST(AcganHead, GradientMatchesFiniteDifferences) {
  Rng rng(RngSeed{30});
  const Tensor out = rng.normal_tensor({3, 5});
  const std::vector<int> y{0, 3, 1};
  for (bool real : {true, false}) {
    const auto h = detail::acgan_head_loss(out, y, real);
    const auto s = check_gradient([&](const Tensor& o) { return detail::acgan_head_loss(o, y, real).loss; }, out,
                                  h.grad, rng, 20);
    EXPECT_LT(s.max_rel, 1e-2);
  }
}

// Two classes of 8x8 images: bright left half vs bright right half.
Dataset separable_set(std::size_t n, std::uint64_t seed) {
  Rng rng(RngSeed{seed});
  Dataset d;
  d.num_classes = 2;
  d.images = Tensor({n, 1, 8, 8});
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    d.labels.push_back(y);
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c) {
        const bool lit = (c < 4) == (y == 0);
        d.images[i * 64 + r * 8 + c] = static_cast<Real>(std::clamp((lit ? 0.7 : 0.3) + rng.normal(0, 0.1), 0.0, 1.0));
      }
  }
  return d;
}

// Perceptron with bias: terminates with zero mistakes iff it finds a
// separating hyperplane within the epoch budget.
bool perceptron_separates(const Dataset& d) {
  std::vector<double> w(65, 0.0);
  for (int epoch = 0; epoch < 1000; ++epoch) {
    int mistakes = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double t = d.labels[i] == 1 ? 1.0 : -1.0;
      double s = w[64];
      for (std::size_t j = 0; j < 64; ++j) s += w[j] * d.images[i * 64 + j];
      if (t * s <= 0) {
        ++mistakes;
        for (std::size_t j = 0; j < 64; ++j) w[j] += t * d.images[i * 64 + j];
        w[64] += t;
      }
    }
    if (mistakes == 0) return true;
  }
  return false;
}

TEST(TrainClassifier, SeparableSetReachesFullAccuracy) {
  const Dataset d = separable_set(200, 3);
  ASSERT_TRUE(perceptron_separates(d));
  ClassifierTrainConfig cfg;
  cfg.architecture = "linear";
  cfg.epochs = 50;
  cfg.lr = 0.5;
  TrainingLog log;
  const Classifier m = train_classifier(d, cfg, RngSeed{4}, &log);
  EXPECT_EQ(log.size(), 50u);
  EXPECT_GE(log.back().train_accuracy, 0.99);
  EXPECT_GE(accuracy(m, d), 0.99);
}

TEST(TrainClassifier, ZeroEpochsKeepsInitialization) {
  const Dataset d = separable_set(20, 1);
  ClassifierTrainConfig cfg;
  cfg.architecture = "mlp2";
  cfg.epochs = 0;
  const Classifier m = train_classifier(d, cfg, RngSeed{9});
  const Classifier init = make_classifier("mlp2", {1, 8, 8}, 2, Rng(RngSeed{9}).fork("init").seed());
  EXPECT_EQ(m.net.params(), init.net.params());
}

TEST(TrainClassifier, DeterministicAndResumable) {
  const Dataset d = make_shapes_dataset(120, RngSeed{5}, 1, 16);
  ClassifierTrainConfig cfg;
  cfg.epochs = 4;
  const Classifier a = train_classifier(d, cfg, RngSeed{6});
  const Classifier b = train_classifier(d, cfg, RngSeed{6});
  EXPECT_EQ(a.net.params(), b.net.params());

  Classifier resumed = make_classifier(cfg.architecture, d.image_shape(), d.num_classes,
                                       Rng(RngSeed{6}).fork("init").seed());
  continue_training(resumed, d, cfg, RngSeed{6}, 0, 2);
  Classifier reloaded = classifier_from_checkpoint(decode_checkpoint(encode_checkpoint(classifier_to_checkpoint(resumed))));
  continue_training(reloaded, d, cfg, RngSeed{6}, 2, 4);
  EXPECT_EQ(reloaded.net.params(), a.net.params());
}

TEST(TrainClassifier, DivergenceIsReported) {
  const Dataset d = separable_set(20, 2);
  ClassifierTrainConfig cfg;
  cfg.architecture = "linear";
  cfg.epochs = 1;
  Classifier m = make_classifier("linear", {1, 8, 8}, 2, RngSeed{1});
  m.net.params()[0][0] = std::numeric_limits<Real>::quiet_NaN();
  try {
    continue_training(m, d, cfg, RngSeed{1}, 0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDivergence);
  }
}

}  // namespace
}  // namespace glens
