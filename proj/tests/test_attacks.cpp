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

#include <random>

#include "glens/glens.hpp"
#include "support/fixtures.hpp"

namespace glens {
namespace {

using testing::record_for;
using testing::shapes_generator;

// Closest boundary point of the 2-D l1 ball found by walking its perimeter
// in steps of `step`. An exterior point projects onto the boundary, so this
// is a dense search over every candidate.
std::pair<double, double> grid_projection(double vx, double vy, double cx, double cy, double r, double step) {
  double best = std::numeric_limits<double>::infinity(), bx = cx, by = cy;
  const auto n = static_cast<std::size_t>(std::ceil(r / step));
  for (int qx : {-1, 1})
    for (int qy : {-1, 1})
      for (std::size_t i = 0; i <= n; ++i) {
        const double a = std::min(r, static_cast<double>(i) * step);
        const double ux = cx + qx * a, uy = cy + qy * (r - a);
        const double d = (ux - vx) * (ux - vx) + (uy - vy) * (uy - vy);
        if (d < best) {
          best = d;
          bx = ux;
          by = uy;
        }
      }
  return {bx, by};
}

Tensor vec(std::vector<Real> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

TEST(ProjectL1, AnalyticExamples) {
  const Tensor origin({2});
  EXPECT_EQ(project_l1_ball(vec({3, 0}), origin, 1), vec({1, 0}));
  EXPECT_EQ(project_l1_ball(vec({1, 1}), origin, 1), vec({0.5, 0.5}));
  const Tensor inside = vec({0.2, -0.3});
  EXPECT_EQ(project_l1_ball(inside, origin, 1), inside);
  EXPECT_THROW(project_l1_ball(inside, origin, 0), Error);
  EXPECT_THROW(project_l1_ball(inside, Tensor({3}), 1), Error);
}

TEST(ProjectL1, MatchesGridSearchIn2d) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> coord(-3, 3), rad(0.1, 2);
  for (int inst = 0; inst < 200; ++inst) {
    const double cx = coord(gen), cy = coord(gen), r = rad(gen);
    const double vx = coord(gen), vy = coord(gen);
    const Tensor p = project_l1_ball(vec({static_cast<Real>(vx), static_cast<Real>(vy)}),
                                     vec({static_cast<Real>(cx), static_cast<Real>(cy)}), r);
    double ox = vx, oy = vy;
    if (std::abs(vx - cx) + std::abs(vy - cy) > r) std::tie(ox, oy) = grid_projection(vx, vy, cx, cy, r, 1e-3);
    EXPECT_LE(std::hypot(p[0] - ox, p[1] - oy), 2e-3) << "instance " << inst;
  }
}

TEST(ProjectL1, MembershipAndIdempotenceInHighDimensions) {
  Rng rng(RngSeed{8});
  for (int inst = 0; inst < 10000; ++inst) {
    const std::size_t n = 1 + rng.uniform_index(300);
    const Tensor v = rng.normal_tensor({n}, rng.uniform(0.1, 50));
    const Tensor c = rng.normal_tensor({n});
    const double r = rng.uniform(1e-3, 10);
    const Tensor p = project_l1_ball(v, c, r);
    double l1 = 0;
    for (std::size_t i = 0; i < n; ++i) l1 += std::abs(static_cast<double>(p[i]) - c[i]);
    ASSERT_LE(l1, r + 1e-6) << "instance " << inst;
    ASSERT_EQ(project_l1_ball(p, c, r), p) << "instance " << inst;
  }
}

TEST(Adam, ZeroGradientLeavesIterate) {
  Tensor x = vec({1, -2, 3});
  const Tensor start = x;
  AdamState s;
  for (int t = 0; t < 50; ++t) adam_step(s, x, Tensor({3}), 0.1);
  EXPECT_EQ(x, start);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor x = vec({0, 0, 0});
  AdamState s;
  adam_step(s, x, vec({2, -0.5, 1e-3}), 0.1);
  EXPECT_NEAR(x[0], -0.1, 1e-6);
  EXPECT_NEAR(x[1], 0.1, 1e-6);
  EXPECT_NEAR(x[2], -0.1, 1e-5);
}

TEST(Adam, MatchesScalarReference) {
  Rng rng(RngSeed{9});
  Tensor x = rng.normal_tensor({5});
  std::vector<double> ref(x.values().begin(), x.values().end()), m(5, 0.0), v(5, 0.0);
  AdamState s;
  for (int t = 1; t <= 100; ++t) {
    const Tensor g = rng.normal_tensor({5});
    const double lr = 0.01 * (1 + t % 3);
    adam_step(s, x, g, lr);
    for (std::size_t i = 0; i < 5; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(x[i], ref[i], 1e-6);
}

TEST(Schedule, WarmupPlateauCosine) {
  const ScheduleParams p{0.1, 1.0 / 20, 1.0 / 4};
  const std::size_t total = 1000;
  EXPECT_EQ(lr_schedule(0, total, p), 0);
  EXPECT_NEAR(lr_schedule(50, total, p), 0.1, 1e-12);
  EXPECT_NEAR(lr_schedule(25, total, p), 0.05, 1e-12);
  for (std::size_t t = 50; t <= 250; ++t) EXPECT_NEAR(lr_schedule(t, total, p), 0.1, 1e-12);
  EXPECT_NEAR(lr_schedule(625, total, p), 0.05, 1e-12);
  EXPECT_LT(lr_schedule(total - 1, total, p), 1e-3 * 0.1);
  for (std::size_t t = 251; t < total; ++t) EXPECT_LE(lr_schedule(t, total, p), lr_schedule(t - 1, total, p));
}

TEST(Spherical, StepsStayOnTheSphere) {
  Rng rng(RngSeed{10});
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(64);
    const Tensor z = rng.normal_tensor({3, k}, rng.uniform(0.1, 10));
    const Tensor out = spherical_step(z, rng.normal_tensor({3, k}), rng.uniform(0, 1), rng);
    for (std::size_t r = 0; r < 3; ++r) {
      double n2 = 0;
      for (std::size_t j = 0; j < k; ++j) n2 += static_cast<double>(out[r * k + j]) * out[r * k + j];
      EXPECT_NEAR(std::sqrt(n2), std::sqrt(static_cast<double>(k)), 1e-5);
    }
  }
}

TEST(Spherical, ZeroGradientRenormalizes) {
  Rng rng(RngSeed{11});
  const Tensor z = rng.normal_tensor({2, 16});
  const Tensor out = spherical_step(z, Tensor({2, 16}), 0.5, rng);
  for (std::size_t r = 0; r < 2; ++r) {
    double n2 = 0;
    for (std::size_t j = 0; j < 16; ++j) n2 += static_cast<double>(z[r * 16 + j]) * z[r * 16 + j];
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(out[r * 16 + j], z[r * 16 + j] * 4 / std::sqrt(n2), 1e-6);
  }
  Tensor zero({1, 16});
  project_to_sphere(zero, rng);
  EXPECT_NEAR(l2_norm(zero), 4, 1e-5);
}

TEST(Spherical, DescentReachesSphericalOptimum) {
  Rng rng(RngSeed{12});
  Tensor z0 = rng.normal_tensor({1, 16});
  project_to_sphere(z0, rng);
  Tensor z = rng.normal_tensor({1, 16});
  project_to_sphere(z, rng);
  for (int t = 0; t < 500; ++t) {
    Tensor g = sub(z, z0);
    z = spherical_step(z, scale(g, 2), 0.1, rng);
  }
  EXPECT_LT(l2_norm(sub(z, z0)), 1e-2);

  Tensor za = rng.normal_tensor({1, 16});
  SphericalAdam opt(rng.fork("adam"));
  for (int t = 0; t < 500; ++t) {
    opt.step(za, scale(sub(za, z0), 2), 0.05);
    ASSERT_NEAR(l2_norm(za), 4, 1e-5);
  }
}

struct Scene {
  Classifier model;
  FLRoundRecord record;
};

Scene attack_scene(std::uint64_t seed, std::size_t batch = 1) {
  Scene s;
  s.model = make_classifier("convnet4", {1, 32, 32}, 10, RngSeed{seed});
  s.record = record_for(s.model, make_shapes_dataset(60, RngSeed{seed + 1}), batch, seed + 2);
  return s;
}

AttackConfig small_config(std::size_t iters = 20) {
  AttackConfig cfg;
  cfg.iters_per_stage = iters;
  cfg.coarse_iters = 5;
  cfg.trials = 2;
  cfg.seed = RngSeed{3};
  return cfg;
}

void expect_same_report(const ReconstructionReport& a, const ReconstructionReport& b) {
  EXPECT_EQ(a.final_images, b.final_images);
  EXPECT_EQ(a.chosen_stage, b.chosen_stage);
  EXPECT_EQ(a.best_loss, b.best_loss);
  ASSERT_EQ(a.stages.size(), b.stages.size());
  for (std::size_t s = 0; s < a.stages.size(); ++s) {
    EXPECT_EQ(a.stages[s].stage_id, b.stages[s].stage_id);
    EXPECT_EQ(a.stages[s].loss, b.stages[s].loss);
  }
}

TEST(AttackGifd, Deterministic) {
  const Scene s = attack_scene(20);
  const AttackConfig cfg = small_config();
  expect_same_report(attack_gifd(s.record, shapes_generator(), cfg), attack_gifd(s.record, shapes_generator(), cfg));
  expect_same_report(attack_pixel(s.record, cfg), attack_pixel(s.record, cfg));
}

TEST(AttackGifd, ZeroLayersEqualsLatent) {
  const Scene s = attack_scene(21);
  AttackConfig cfg = small_config();
  cfg.K = 0;
  const ReconstructionReport gifd = attack_gifd(s.record, shapes_generator(), cfg);
  const ReconstructionReport latent = attack_latent(s.record, shapes_generator(), cfg);
  expect_same_report(gifd, latent);
  EXPECT_EQ(latent.chosen_stage, "latent");
  EXPECT_EQ(latent.stages.size(), 1u);
}

TEST(AttackGifd, StagesTrackBestAndStayInBalls) {
  const Scene s = attack_scene(22, 2);
  AttackConfig cfg = small_config(30);
  cfg.radii = {2, 5, 20, 50};
  const ReconstructionReport rep = attack_gifd(s.record, shapes_generator(), cfg);
  ASSERT_EQ(rep.stages.size(), cfg.K + 1);
  double min_stage = std::numeric_limits<double>::infinity();
  std::string first_min;
  for (std::size_t i = 0; i < rep.stages.size(); ++i) {
    const StageTrace& st = rep.stages[i];
    EXPECT_EQ(st.loss.size(), cfg.iters_per_stage);
    EXPECT_EQ(st.best_loss, *std::min_element(st.loss.begin(), st.loss.end()));
    EXPECT_EQ(st.loss[st.best_iter], st.best_loss);
    if (i > 0) {
      EXPECT_EQ(st.stage_id, "layer-" + std::to_string(i));
      EXPECT_LE(st.best_l1_offset, cfg.radii[i - 1] + 1e-4);
    }
    if (st.best_loss < min_stage) {
      min_stage = st.best_loss;
      first_min = st.stage_id;
    }
  }
  EXPECT_EQ(rep.best_loss, min_stage);
  EXPECT_EQ(rep.chosen_stage, first_min);
  EXPECT_LE(rep.best_loss, rep.stages[0].best_loss);
  ASSERT_EQ(rep.trial_losses.size(), cfg.trials);
  for (double l : rep.trial_losses) EXPECT_LE(rep.best_loss, l);
  EXPECT_EQ(rep.trial_losses[rep.trial_index], rep.best_loss);
}

TEST(AttackGifd, ChosenImagesReproduceReportedLoss) {
  const Scene s = attack_scene(23);
  const AttackConfig cfg = small_config();
  const ReconstructionReport rep = attack_gifd(s.record, shapes_generator(), cfg);
  const double loss = attack_loss(rep.final_images, rep.labels_used.labels, s.model, s.record.shared_gradients,
                                  make_objective(s.record, cfg));
  EXPECT_NEAR(loss, rep.best_loss, 1e-6);
}

TEST(AttackGifd, ConfigErrors) {
  const Scene s = attack_scene(24);
  AttackConfig cfg = small_config();
  cfg.K = shapes_generator().depth() + 1;
  cfg.radii.resize(cfg.K, 100);
  try {
    attack_gifd(s.record, shapes_generator(), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  cfg = small_config();
  cfg.radii = {1};
  EXPECT_THROW(attack_gifd(s.record, shapes_generator(), cfg), Error);
  try {
    run_attack(s.record, nullptr, small_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingArtifact);
  }
}

// A classifier that predicts `label` for every input.
Classifier constant_classifier(int label) {
  Classifier m = make_classifier("linear", {1, 32, 32}, 10, RngSeed{1});
  for (auto& p : m.net.params()) p.fill(0);
  m.net.params()[1][static_cast<std::size_t>(label)] = 10;
  return m;
}

TEST(AttackMapping, FixedPointAndCoarseBudget) {
  const Scene s = attack_scene(25);
  const AttackConfig cfg = small_config();
  const int initial = resolve_labels(s.record, cfg.label_mode).labels[0];
  const ReconstructionReport mapped = attack_gifd_with_mapping(s.record, shapes_generator(), constant_classifier(initial), cfg);
  const ReconstructionReport plain = attack_gifd(s.record, shapes_generator(), cfg);
  EXPECT_EQ(mapped.final_images, plain.final_images);
  EXPECT_EQ(mapped.generator_labels, std::vector<int>{initial});
  ASSERT_TRUE(mapped.initial_labels);
  ASSERT_EQ(mapped.coarse_stages.size(), cfg.K + 1);
  std::size_t coarse_total = 0;
  for (const auto& st : mapped.coarse_stages) coarse_total += st.loss.size();
  EXPECT_EQ(coarse_total, cfg.coarse_iters * (cfg.K + 1));
}

TEST(AttackMapping, MappedLabelConditionsOnlyTheGenerator) {
  const Scene s = attack_scene(26);
  const AttackConfig cfg = small_config();
  const int initial = resolve_labels(s.record, cfg.label_mode).labels[0];
  const int other = (initial + 3) % 10;
  const ReconstructionReport rep = attack_gifd_with_mapping(s.record, shapes_generator(), constant_classifier(other), cfg);
  EXPECT_EQ(rep.generator_labels, std::vector<int>{other});
  EXPECT_EQ(rep.labels_used.labels, std::vector<int>{initial});
}

TEST(AttackPixel, RecoversLinearModelInput) {
  Classifier model = make_classifier("linear", {1, 16, 16}, 10, RngSeed{30});
  const FLRoundRecord rec = record_for(model, make_shapes_dataset(20, RngSeed{31}, 1, 16), 1, 32);
  AttackConfig cfg;
  cfg.method = AttackMethod::kPixel;
  cfg.iters_per_stage = 2000;
  cfg.trials = 1;
  cfg.alpha_tv = 0;
  cfg.alpha_l2 = 0;
  cfg.seed = RngSeed{33};
  const ReconstructionReport rep = attack_pixel(rec, cfg);
  EXPECT_GT(psnr(rep.final_images, rec.victim_batch.pixels), 30);
  const auto& curve = rep.stages[0].loss;
  EXPECT_EQ(rep.best_loss, *std::min_element(curve.begin(), curve.end()));
}

TEST(AttackLatent, RecoversInManifoldTargets) {
  const GeneratorStack& gen = shapes_generator();
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(RngSeed{100 + seed});
    const std::vector<int> y{static_cast<int>(seed % 10)};
    Dataset victim;
    victim.num_classes = 10;
    victim.images = gen.generate(sample_latents(gen, 1, rng), y);
    victim.labels = y;
    const Classifier model = make_classifier("convnet4", {1, 32, 32}, 10, rng.fork("model").seed());
    const FLRoundRecord rec = record_for(model, victim, 1, seed);
    AttackConfig cfg;
    cfg.iters_per_stage = 1000;
    cfg.trials = 1;
    cfg.seed = RngSeed{seed};
    const ReconstructionReport rep = attack_latent(rec, gen, cfg);
    solved += rep.best_match < 0.01;
  }
  EXPECT_GE(solved, 8);
}

}  // namespace
}  // namespace glens
