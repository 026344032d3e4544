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
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glens/attacks/optim.hpp"
#include "glens/core/error.hpp"
#include "glens/core/log.hpp"
#include "glens/core/rng.hpp"
#include "glens/flsim/flsim.hpp"
#include "glens/gradmatch.hpp"
#include "glens/labels/labels.hpp"
#include "glens/models/classifier.hpp"
#include "glens/models/generator.hpp"

namespace glens {

enum class AttackMethod { kPixel, kLatent, kGifd };
enum class LabelMode { kExtract, kInferBatch, kMap, kGiven };

inline std::string to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::kPixel: return "pixel";
    case AttackMethod::kLatent: return "latent";
    case AttackMethod::kGifd: return "gifd";
  }
  return "gifd";
}

inline AttackMethod parse_attack_method(const std::string& s) {
  if (s == "pixel") return AttackMethod::kPixel;
  if (s == "latent") return AttackMethod::kLatent;
  if (s == "gifd") return AttackMethod::kGifd;
  fail(ErrorKind::kConfig, "unknown attack method '" + s + "'");
}

inline std::string to_string(LabelMode m) {
  switch (m) {
    case LabelMode::kExtract: return "extract";
    case LabelMode::kInferBatch: return "infer-batch";
    case LabelMode::kMap: return "map";
    case LabelMode::kGiven: return "given";
  }
  return "extract";
}

inline LabelMode parse_label_mode(const std::string& s) {
  for (auto m : {LabelMode::kExtract, LabelMode::kInferBatch, LabelMode::kMap, LabelMode::kGiven})
    if (to_string(m) == s) return m;
  fail(ErrorKind::kConfig, "unknown label mode '" + s + "'");
}

struct AttackConfig {
  AttackMethod method = AttackMethod::kGifd;
  std::size_t K = 4;
  std::vector<double> radii{100, 300, 1000, 3000};
  std::size_t iters_per_stage = 1000;
  std::size_t coarse_iters = 100;
  double lr = 0.1;
  double warmup_frac = 1.0 / 20.0;
  double decay_start_frac = 1.0 / 4.0;
  Distance distance = Distance::kNegCosine;
  bool per_layer_distance = false;
  double alpha_tv = 1e-4;
  double alpha_l2 = 1e-6;
  std::size_t trials = 4;
  RngSeed seed{0};
  LabelMode label_mode = LabelMode::kExtract;
  // Replicate the inferred defense on the dummy gradients.
  bool adaptive_transform = true;
  // Ablation switches: project onto the l1 ball after every layer step, and
  // return the min-loss stage rather than the last one.
  bool use_ball = true;
  bool select_min_loss = true;

  ScheduleParams schedule() const { return {lr, warmup_frac, decay_start_frac}; }

  void validate(std::size_t generator_depth = std::numeric_limits<std::size_t>::max()) const {
    require(iters_per_stage > 0, ErrorKind::kConfig, "iters_per_stage must be > 0");
    require(trials > 0, ErrorKind::kConfig, "trials must be > 0");
    require(lr > 0, ErrorKind::kConfig, "lr must be > 0");
    if (method != AttackMethod::kGifd) return;
    require(K <= generator_depth, ErrorKind::kConfig,
            "K = " + std::to_string(K) + " exceeds generator depth " + std::to_string(generator_depth));
    require(radii.size() >= K, ErrorKind::kConfig,
            "need " + std::to_string(K) + " radii, got " + std::to_string(radii.size()));
    for (std::size_t i = 0; i < K; ++i) require(radii[i] > 0, ErrorKind::kConfig, "radii must be positive");
    for (std::size_t i = 1; i < K; ++i)
      if (radii[i] < radii[i - 1]) log_warning("l1 radii are not non-decreasing");
  }
};

struct StageTrace {
  std::string stage_id;  // "pixel", "latent" or "layer-i"
  std::vector<double> loss;   // L_grad: gradient distance + fidelity term
  std::vector<double> match;  // gradient distance alone
  std::vector<double> lr;
  double best_loss = std::numeric_limits<double>::infinity();
  double best_match = 0;
  std::size_t best_iter = 0;
  Tensor best_images;
  // Layer stages: the radius and the largest per-sample l1 distance of the
  // best iterate from the stage's starting point.
  double radius = 0;
  double best_l1_offset = 0;
};

struct ReconstructionReport {
  std::string method;
  Tensor final_images;
  std::string chosen_stage;
  double best_loss = std::numeric_limits<double>::infinity();
  double best_match = 0;
  std::vector<StageTrace> stages;
  LabelEstimate labels_used;          // labels fed to the gradient computation
  std::vector<int> generator_labels;  // class condition of the generator
  std::optional<LabelEstimate> initial_labels;  // before label mapping
  std::vector<StageTrace> coarse_stages;
  std::size_t trial_index = 0;
  std::vector<double> trial_losses;
  std::string transform_kind = "identity";
  std::map<std::string, double> metrics;
};

// Labels fed to the dummy-gradient computation, per cfg.label_mode.
inline LabelEstimate resolve_labels(const FLRoundRecord& rec, LabelMode mode) {
  const std::size_t batch = rec.victim_batch.batch_size();
  switch (mode) {
    case LabelMode::kGiven: {
      require(rec.victim_batch.labels.has_value(), ErrorKind::kInvalidArgument, "record holds no labels");
      LabelEstimate est{*rec.victim_batch.labels, LabelMethod::kGiven, "ground-truth labels (ablation only)", false};
      return est;
    }
    case LabelMode::kExtract:
      if (batch == 1) return infer_batch_labels(rec.shared_gradients, 1);
      [[fallthrough]];
    case LabelMode::kInferBatch:
    case LabelMode::kMap: return infer_batch_labels(rec.shared_gradients, batch);
  }
  return {};
}

inline MatchObjective make_objective(const FLRoundRecord& rec, const AttackConfig& cfg) {
  MatchObjective obj;
  obj.distance = cfg.distance;
  obj.per_layer = cfg.per_layer_distance;
  obj.alpha_tv = cfg.alpha_tv;
  obj.alpha_l2 = cfg.alpha_l2;
  if (cfg.adaptive_transform) obj.transform = infer_transform(rec.shared_gradients);
  return obj;
}

// Everything one attack evaluation needs; read-only during a run.
struct AttackContext {
  Classifier model;
  GradientSet observed;
  MatchObjective objective;
  std::vector<int> labels;      // classifier labels
  std::vector<int> gen_labels;  // generator condition
  std::size_t batch = 0;
};

inline AttackContext make_context(const FLRoundRecord& rec, const AttackConfig& cfg, const LabelEstimate& labels,
                                  std::vector<int> gen_labels = {}) {
  AttackContext ctx;
  ctx.model = classifier_from_checkpoint(rec.global_before);
  ctx.observed = rec.shared_gradients;
  ctx.objective = make_objective(rec, cfg);
  ctx.labels = labels.labels;
  ctx.gen_labels = gen_labels.empty() ? labels.labels : std::move(gen_labels);
  ctx.batch = rec.victim_batch.batch_size();
  require(ctx.labels.size() == ctx.batch && ctx.gen_labels.size() == ctx.batch, ErrorKind::kShapeMismatch,
          "label count does not match the batch size");
  return ctx;
}

struct ValueAndGrad {
  double value = 0;
  Tensor grad;
};

// Gradient of a scalar loss functional at a point, with shape checking.
using LossFunctional = std::function<ValueAndGrad(const Tensor&)>;

inline Tensor input_gradient(const LossFunctional& f, const Tensor& at) {
  ValueAndGrad vg = f(at);
  require(vg.grad.shape() == at.shape(), ErrorKind::kShapeMismatch,
          "loss functional returned a gradient of shape " + shape_str(vg.grad.shape()) + " for input " +
              shape_str(at.shape()));
  return vg.grad;
}

// L_grad(G_i o ... o G_N(h_i)) and its gradient with respect to h_i.
struct TailEvaluation {
  double value = 0;
  double match = 0;
  Tensor images;
  Tensor grad;
};

inline TailEvaluation evaluate_tail(const GeneratorStack& gen, const FeatureVec& h, const AttackContext& ctx,
                                    bool want_grad = true) {
  const auto trace = gen.tail_trace(h, ctx.gen_labels);
  TailEvaluation ev;
  ev.images = trace.images();
  AttackLoss loss = attack_loss_with_grad(ev.images, ctx.labels, ctx.model, ctx.observed, ctx.objective, want_grad);
  ev.value = loss.value;
  ev.match = loss.match;
  if (want_grad) ev.grad = gen.tail_backward(trace, std::move(loss.grad));
  return ev;
}

inline LossFunctional tail_functional(const GeneratorStack& gen, std::size_t layer, const AttackContext& ctx) {
  return [&gen, layer, &ctx](const Tensor& h) {
    TailEvaluation ev = evaluate_tail(gen, {h, layer}, ctx);
    return ValueAndGrad{ev.value, std::move(ev.grad)};
  };
}

namespace detail {

inline void check_finite_loss(double loss, const std::string& stage, std::size_t iter) {
  if (!std::isfinite(loss))
    fail(ErrorKind::kDivergence, "attack loss non-finite in stage " + stage + " at iteration " + std::to_string(iter));
}

inline void record_iterate(StageTrace& st, std::size_t iter, double loss, double match, double lr,
                           const Tensor& images, bool* improved = nullptr) {
  st.loss.push_back(loss);
  st.match.push_back(match);
  st.lr.push_back(lr);
  const bool better = loss < st.best_loss;
  if (better) {
    st.best_loss = loss;
    st.best_match = match;
    st.best_iter = iter;
    st.best_images = images;
  }
  if (improved) *improved = better;
}

inline double max_sample_l1(const Tensor& a, const Tensor& b) {
  const std::size_t rows = a.dim(0), per = a.size() / rows;
  double worst = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0;
    for (std::size_t j = 0; j < per; ++j) acc += std::abs(static_cast<double>(a[r * per + j]) - b[r * per + j]);
    worst = std::max(worst, acc);
  }
  return worst;
}

// Per-sample projection onto the l1 ball of `radius` around `center`.
inline Tensor project_rows_l1(const Tensor& v, const Tensor& center, double radius) {
  const std::size_t rows = v.dim(0), per = v.size() / rows;
  Tensor out = v;
  Shape row_shape{per};
  for (std::size_t r = 0; r < rows; ++r) {
    Tensor row(row_shape, std::vector<Real>(v.data() + r * per, v.data() + (r + 1) * per));
    Tensor c(row_shape, std::vector<Real>(center.data() + r * per, center.data() + (r + 1) * per));
    const Tensor p = project_l1_ball(row, c, radius);
    std::copy_n(p.data(), per, out.data() + r * per);
  }
  return out;
}

struct TrialResult {
  std::vector<StageTrace> stages;
  Tensor images;
  std::string chosen;
  double loss = std::numeric_limits<double>::infinity();
  double match = 0;
};

// Running min-loss selection over stages (ties keep the earliest); without
// selection the last stage is returned.
inline void select_output(TrialResult& r, bool min_loss) {
  if (r.stages.empty()) return;
  std::size_t pick = r.stages.size() - 1;
  if (min_loss) {
    pick = 0;
    for (std::size_t s = 1; s < r.stages.size(); ++s)
      if (r.stages[s].best_loss < r.stages[pick].best_loss) pick = s;
  }
  r.images = r.stages[pick].best_images;
  r.chosen = r.stages[pick].stage_id;
  r.loss = r.stages[pick].best_loss;
  r.match = r.stages[pick].best_match;
}

inline TrialResult pixel_trial(const AttackContext& ctx, const AttackConfig& cfg, const Shape& image_shape, Rng rng) {
  Shape shape = image_shape;
  shape.insert(shape.begin(), ctx.batch);
  Tensor x = rng.uniform_tensor(shape, 0.0, 1.0);
  AdamState state;
  StageTrace st;
  st.stage_id = "pixel";
  const ScheduleParams sched = cfg.schedule();
  for (std::size_t t = 0; t < cfg.iters_per_stage; ++t) {
    AttackLoss loss = attack_loss_with_grad(x, ctx.labels, ctx.model, ctx.observed, ctx.objective);
    check_finite_loss(loss.value, st.stage_id, t);
    const double lr = lr_schedule(t, cfg.iters_per_stage, sched);
    record_iterate(st, t, loss.value, loss.match, lr, x);
    adam_step(state, x, loss.grad, lr);
    clamp_inplace(x, 0, 1);
  }
  TrialResult r;
  r.stages.push_back(std::move(st));
  select_output(r, true);
  return r;
}

// Algorithm: latent stage with the spherical optimizer, then layers 1..K
// with projected Adam inside l1 balls, each stage starting from the previous
// stage's best iterate pushed one block forward.
inline TrialResult gifd_trial(const GeneratorStack& gen, const AttackContext& ctx, const AttackConfig& cfg,
                              std::size_t K, std::size_t iters, Rng rng) {
  const ScheduleParams sched = cfg.schedule();
  TrialResult r;

  Tensor z = sample_latents(gen, ctx.batch, rng);
  Rng sphere_rng = rng.fork("sphere");
  project_to_sphere(z, sphere_rng);
  SphericalAdam opt(sphere_rng);
  StageTrace latent;
  latent.stage_id = "latent";
  Tensor best_z = z;
  for (std::size_t t = 0; t < iters; ++t) {
    TailEvaluation ev = evaluate_tail(gen, {z, 0}, ctx);
    check_finite_loss(ev.value, latent.stage_id, t);
    const double lr = lr_schedule(t, iters, sched);
    bool improved = false;
    record_iterate(latent, t, ev.value, ev.match, lr, ev.images, &improved);
    if (improved) best_z = z;
    opt.step(z, ev.grad, lr);
  }
  r.stages.push_back(std::move(latent));

  FeatureVec best{best_z, 0};
  for (std::size_t i = 1; i <= K; ++i) {
    const FeatureVec start = gen.step(best, ctx.gen_labels);
    const Tensor center = start.values;
    Tensor h = center;
    AdamState state;
    StageTrace st;
    st.stage_id = "layer-" + std::to_string(i);
    st.radius = cfg.use_ball ? cfg.radii[i - 1] : 0;
    Tensor best_h = h;
    for (std::size_t t = 0; t < iters; ++t) {
      TailEvaluation ev = evaluate_tail(gen, {h, i}, ctx);
      check_finite_loss(ev.value, st.stage_id, t);
      const double lr = lr_schedule(t, iters, sched);
      bool improved = false;
      record_iterate(st, t, ev.value, ev.match, lr, ev.images, &improved);
      if (improved) best_h = h;
      adam_step(state, h, ev.grad, lr);
      if (cfg.use_ball) h = project_rows_l1(h, center, cfg.radii[i - 1]);
    }
    st.best_l1_offset = max_sample_l1(best_h, center);
    r.stages.push_back(std::move(st));
    best = {best_h, i};
  }
  select_output(r, cfg.select_min_loss);
  return r;
}

}  // namespace detail

namespace detail {

inline ReconstructionReport run_trials(const std::string& method, const AttackConfig& cfg, const AttackContext& ctx,
                                       const std::function<TrialResult(Rng)>& trial) {
  ReconstructionReport rep;
  rep.method = method;
  rep.generator_labels = ctx.gen_labels;
  rep.transform_kind = to_string(ctx.objective.transform.kind);
  const Rng root(cfg.seed);
  std::optional<TrialResult> best;
  for (std::size_t k = 0; k < cfg.trials; ++k) {
    TrialResult r = trial(root.fork(k));
    rep.trial_losses.push_back(r.loss);
    if (!best || r.loss < best->loss) {
      best = std::move(r);
      rep.trial_index = k;
    }
  }
  rep.final_images = best->images;
  rep.chosen_stage = best->chosen;
  rep.best_loss = best->loss;
  rep.best_match = best->match;
  rep.stages = std::move(best->stages);
  return rep;
}

}  // namespace detail

inline ReconstructionReport attack_pixel(const FLRoundRecord& rec, const AttackConfig& cfg) {
  cfg.validate();
  const LabelEstimate labels = resolve_labels(rec, cfg.label_mode);
  const AttackContext ctx = make_context(rec, cfg, labels);
  const Shape image_shape = rec.victim_batch.image_shape();
  ReconstructionReport rep = detail::run_trials("pixel", cfg, ctx, [&](Rng rng) {
    return detail::pixel_trial(ctx, cfg, image_shape, rng);
  });
  rep.labels_used = labels;
  return rep;
}

namespace detail {

inline ReconstructionReport gifd_with_labels(const FLRoundRecord& rec, const GeneratorStack& gen,
                                             const AttackConfig& cfg, std::size_t K, std::size_t iters,
                                             const LabelEstimate& labels, std::vector<int> gen_labels,
                                             const std::string& method) {
  require(gen.spec().image_shape == rec.victim_batch.image_shape(), ErrorKind::kShapeMismatch,
          "generator output " + shape_str(gen.spec().image_shape) + " does not match the victim images " +
              shape_str(rec.victim_batch.image_shape()));
  const AttackContext ctx = make_context(rec, cfg, labels, std::move(gen_labels));
  for (int y : ctx.gen_labels)
    require(y >= 0 && static_cast<std::size_t>(y) < std::max<std::size_t>(1, gen.spec().num_classes),
            ErrorKind::kOutOfRange, "generator condition label " + std::to_string(y) + " out of range");
  ReconstructionReport rep =
      run_trials(method, cfg, ctx, [&](Rng rng) { return gifd_trial(gen, ctx, cfg, K, iters, rng); });
  rep.labels_used = labels;
  return rep;
}

}  // namespace detail

// Latent-only baseline: the latent stage alone.
inline ReconstructionReport attack_latent(const FLRoundRecord& rec, const GeneratorStack& gen,
                                          const AttackConfig& cfg) {
  cfg.validate(gen.depth());
  const LabelEstimate labels = resolve_labels(rec, cfg.label_mode);
  return detail::gifd_with_labels(rec, gen, cfg, 0, cfg.iters_per_stage, labels, {}, "latent");
}

inline ReconstructionReport attack_gifd(const FLRoundRecord& rec, const GeneratorStack& gen,
                                        const AttackConfig& cfg) {
  cfg.validate(gen.depth());
  const LabelEstimate labels = resolve_labels(rec, cfg.label_mode);
  return detail::gifd_with_labels(rec, gen, cfg, cfg.K, cfg.iters_per_stage, labels, {}, "gifd");
}

// Coarse inversion with the initially inferred labels, relabeling of the
// coarse result by f_m, then a full-budget inversion with the generator
// conditioned on the mapped labels.
inline ReconstructionReport attack_gifd_with_mapping(const FLRoundRecord& rec, const GeneratorStack& gen,
                                                     const Classifier& f_m, const AttackConfig& cfg) {
  cfg.validate(gen.depth());
  const LabelMode initial_mode = cfg.label_mode == LabelMode::kMap ? LabelMode::kExtract : cfg.label_mode;
  const LabelEstimate initial = resolve_labels(rec, initial_mode);
  const ReconstructionReport coarse =
      detail::gifd_with_labels(rec, gen, cfg, cfg.K, cfg.coarse_iters, initial, {}, "gifd-coarse");
  const LabelEstimate mapped = map_label(coarse.final_images, f_m);
  ReconstructionReport rep =
      detail::gifd_with_labels(rec, gen, cfg, cfg.K, cfg.iters_per_stage, initial, mapped.labels, "gifd-mapped");
  rep.initial_labels = initial;
  rep.coarse_stages = coarse.stages;
  return rep;
}

inline ReconstructionReport run_attack(const FLRoundRecord& rec, const GeneratorStack* gen, const AttackConfig& cfg) {
  switch (cfg.method) {
    case AttackMethod::kPixel: return attack_pixel(rec, cfg);
    case AttackMethod::kLatent:
      require(gen != nullptr, ErrorKind::kMissingArtifact, "latent attack needs a generator");
      return attack_latent(rec, *gen, cfg);
    case AttackMethod::kGifd:
      require(gen != nullptr, ErrorKind::kMissingArtifact, "gifd attack needs a generator");
      return attack_gifd(rec, *gen, cfg);
  }
  fail(ErrorKind::kConfig, "unknown attack method");
}

}  // namespace glens
