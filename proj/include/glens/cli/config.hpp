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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glens/attacks/attacks.hpp"
#include "glens/core/error.hpp"
#include "glens/core/rng.hpp"
#include "glens/data/dataset.hpp"
#include "glens/defenses/defenses.hpp"
#include "glens/flsim/flsim.hpp"
#include "glens/models/generator.hpp"
#include "glens/models/train.hpp"

namespace glens {

using Json = nlohmann::json;

struct DatasetConfig {
  std::size_t size = 4000;
  std::size_t heldout_size = 200;
  std::size_t channels = 1;
  std::size_t side = 32;
  ShapeStyle style = ShapeStyle::kPlain;
  // Style of the attack targets and held-out images.
  ShapeStyle target_style = ShapeStyle::kPlain;
  // When set, FL labels are perm[y] of the generator's training labels.
  std::vector<int> fl_label_permutation;
};

struct GlobalModelConfig {
  std::string architecture = "convnet4";
  std::size_t width = 1;
  // Central training (train-global).
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  double lr = 0.05;
  // FedAvg (train-fl).
  std::size_t rounds = 0;
  std::size_t clients_per_round = 2;
  std::size_t local_batch = 32;
  double fl_lr = 0.05;
};

struct AttackPlan {
  std::vector<AttackMethod> methods{AttackMethod::kPixel, AttackMethod::kLatent, AttackMethod::kGifd};
  AttackConfig config;
  bool label_mapping = false;
  std::size_t batch_size = 1;
  std::size_t victim_client = 0;
  std::size_t targets = 4;  // records captured per sweep point
  std::size_t round = 0;
  bool unique_labels = true;
};

struct SweepConfig {
  std::string axis = "none";  // none, defense, batch_size, q, rounds
  std::vector<Json> values;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  DatasetConfig dataset;
  PartitionSpec partition;
  GlobalModelConfig global_model;
  GeneratorTrainConfig generator;
  DefenseSpec defense;
  AttackPlan attack;
  SweepConfig sweep;
  std::size_t tune_k_targets = 4;
  Json source;  // the parsed document, for hashing
};

namespace detail {

inline void check_keys(const Json& j, const std::string& path, const std::set<std::string>& allowed) {
  require(j.is_object(), ErrorKind::kConfig, "'" + path + "' must be an object");
  for (const auto& [key, value] : j.items())
    require(allowed.count(key) > 0, ErrorKind::kConfig, "unknown key '" + (path.empty() ? key : path + "." + key) + "'");
}

template <typename T>
void read(const Json& j, const std::string& key, const std::string& path, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::kConfig, "bad value for '" + (path.empty() ? key : path + "." + key) + "': " + e.what());
  }
}

inline ShapeStyle parse_style(const std::string& s, const std::string& path) {
  if (s == "plain") return ShapeStyle::kPlain;
  if (s == "textured") return ShapeStyle::kTextured;
  fail(ErrorKind::kConfig, "'" + path + "' must be plain or textured, got '" + s + "'");
}

inline std::string style_name(ShapeStyle s) { return s == ShapeStyle::kPlain ? "plain" : "textured"; }

inline DefenseSpec parse_defense(const Json& j, const std::string& path) {
  check_keys(j, path, {"kind", "noise_std", "clip_bound", "prune_rate", "soteria_rate", "defended_layer", "seed"});
  DefenseSpec d;
  std::string kind = "none";
  read(j, "kind", path, kind);
  d.kind = parse_defense_kind(kind);
  read(j, "noise_std", path, d.noise_std);
  read(j, "clip_bound", path, d.clip_bound);
  read(j, "prune_rate", path, d.prune_rate);
  read(j, "soteria_rate", path, d.soteria_rate);
  read(j, "defended_layer", path, d.defended_layer);
  std::uint64_t seed = 0;
  read(j, "seed", path, seed);
  d.seed = RngSeed{seed};
  d.validate();
  return d;
}

}  // namespace detail

// FNV-1a of the canonical (sorted-key) dump.
inline std::string config_hash(const Json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_label(j.dump())));
  return buf;
}

inline ExperimentConfig parse_config(const Json& j) {
  using detail::check_keys;
  using detail::read;
  ExperimentConfig c;
  c.source = j;
  check_keys(j, "", {"seed", "output_dir", "dataset", "partition", "global_model", "generator", "defense", "attack",
                     "sweep", "tune_k"});
  read(j, "seed", "", c.seed);
  read(j, "output_dir", "", c.output_dir);

  if (j.contains("dataset")) {
    const Json& d = j["dataset"];
    check_keys(d, "dataset", {"size", "heldout_size", "channels", "side", "style", "target_style", "fl_label_permutation"});
    read(d, "size", "dataset", c.dataset.size);
    read(d, "heldout_size", "dataset", c.dataset.heldout_size);
    read(d, "channels", "dataset", c.dataset.channels);
    read(d, "side", "dataset", c.dataset.side);
    std::string style = "plain", target = "plain";
    read(d, "style", "dataset", style);
    read(d, "target_style", "dataset", target);
    c.dataset.style = detail::parse_style(style, "dataset.style");
    c.dataset.target_style = detail::parse_style(target, "dataset.target_style");
    read(d, "fl_label_permutation", "dataset", c.dataset.fl_label_permutation);
    if (!c.dataset.fl_label_permutation.empty()) {
      std::vector<int> sorted = c.dataset.fl_label_permutation;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < sorted.size(); ++i)
        require(sorted[i] == static_cast<int>(i) && sorted.size() == kShapeClasses, ErrorKind::kConfig,
                "dataset.fl_label_permutation must be a permutation of 0.." + std::to_string(kShapeClasses - 1));
    }
    require(c.dataset.size > 0, ErrorKind::kConfig, "dataset.size must be > 0");
  }
  c.partition.seed = RngSeed{c.seed};
  if (j.contains("partition")) {
    const Json& p = j["partition"];
    check_keys(p, "partition", {"num_clients", "q"});
    read(p, "num_clients", "partition", c.partition.num_clients);
    c.partition.q = 1.0 / static_cast<double>(std::max<std::size_t>(1, c.partition.num_clients));
    read(p, "q", "partition", c.partition.q);
  } else {
    c.partition.q = 1.0 / static_cast<double>(c.partition.num_clients);
  }
  try {
    c.partition.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, std::string("partition: ") + e.what());
  }

  if (j.contains("global_model")) {
    const Json& g = j["global_model"];
    check_keys(g, "global_model", {"architecture", "width", "epochs", "batch_size", "lr", "rounds",
                                   "clients_per_round", "local_batch", "fl_lr"});
    auto& m = c.global_model;
    read(g, "architecture", "global_model", m.architecture);
    read(g, "width", "global_model", m.width);
    read(g, "epochs", "global_model", m.epochs);
    read(g, "batch_size", "global_model", m.batch_size);
    read(g, "lr", "global_model", m.lr);
    read(g, "rounds", "global_model", m.rounds);
    read(g, "clients_per_round", "global_model", m.clients_per_round);
    read(g, "local_batch", "global_model", m.local_batch);
    read(g, "fl_lr", "global_model", m.fl_lr);
    require(m.architecture == "linear" || m.architecture == "mlp2" || m.architecture == "convnet4",
            ErrorKind::kConfig, "global_model.architecture must be linear, mlp2 or convnet4");
  }

  if (j.contains("generator")) {
    const Json& g = j["generator"];
    check_keys(g, "generator", {"latent_dim", "embed_dim", "channels", "epochs", "batch_size", "lr_generator",
                                "lr_discriminator", "beta1", "disc_width"});
    auto& t = c.generator;
    read(g, "latent_dim", "generator", t.spec.latent_dim);
    read(g, "embed_dim", "generator", t.spec.embed_dim);
    read(g, "channels", "generator", t.spec.channels);
    read(g, "epochs", "generator", t.epochs);
    read(g, "batch_size", "generator", t.batch_size);
    read(g, "lr_generator", "generator", t.lr_generator);
    read(g, "lr_discriminator", "generator", t.lr_discriminator);
    read(g, "beta1", "generator", t.beta1);
    read(g, "disc_width", "generator", t.disc_width);
  }

  if (j.contains("defense")) {
    try {
      c.defense = detail::parse_defense(j["defense"], "defense");
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kConfig) throw;
      fail(ErrorKind::kConfig, e.what());
    }
  }

  if (j.contains("attack")) {
    const Json& a = j["attack"];
    check_keys(a, "attack", {"methods", "K", "radii", "iters_per_stage", "coarse_iters", "lr", "warmup_frac",
                             "decay_start_frac", "distance", "per_layer_distance", "alpha_tv", "alpha_l2", "trials",
                             "label_mode", "adaptive_transform", "use_ball", "select_min_loss", "label_mapping",
                             "batch_size", "victim_client", "targets", "round", "unique_labels"});
    auto& p = c.attack;
    auto& cfg = p.config;
    if (a.contains("methods")) {
      std::vector<std::string> names;
      read(a, "methods", "attack", names);
      p.methods.clear();
      for (const auto& n : names) p.methods.push_back(parse_attack_method(n));
    }
    read(a, "K", "attack", cfg.K);
    read(a, "radii", "attack", cfg.radii);
    read(a, "iters_per_stage", "attack", cfg.iters_per_stage);
    read(a, "coarse_iters", "attack", cfg.coarse_iters);
    read(a, "lr", "attack", cfg.lr);
    read(a, "warmup_frac", "attack", cfg.warmup_frac);
    read(a, "decay_start_frac", "attack", cfg.decay_start_frac);
    std::string distance = to_string(cfg.distance), label_mode = to_string(cfg.label_mode);
    read(a, "distance", "attack", distance);
    cfg.distance = parse_distance(distance);
    read(a, "per_layer_distance", "attack", cfg.per_layer_distance);
    read(a, "alpha_tv", "attack", cfg.alpha_tv);
    read(a, "alpha_l2", "attack", cfg.alpha_l2);
    read(a, "trials", "attack", cfg.trials);
    read(a, "label_mode", "attack", label_mode);
    cfg.label_mode = parse_label_mode(label_mode);
    read(a, "adaptive_transform", "attack", cfg.adaptive_transform);
    read(a, "use_ball", "attack", cfg.use_ball);
    read(a, "select_min_loss", "attack", cfg.select_min_loss);
    read(a, "label_mapping", "attack", p.label_mapping);
    read(a, "batch_size", "attack", p.batch_size);
    read(a, "victim_client", "attack", p.victim_client);
    read(a, "targets", "attack", p.targets);
    read(a, "round", "attack", p.round);
    read(a, "unique_labels", "attack", p.unique_labels);
    try {
      cfg.validate();
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, std::string("attack: ") + e.what());
    }
    require(p.batch_size >= 1, ErrorKind::kConfig, "attack.batch_size must be >= 1");
  }
  c.attack.config.seed = RngSeed{c.seed};

  if (j.contains("sweep")) {
    const Json& s = j["sweep"];
    check_keys(s, "sweep", {"axis", "values"});
    read(s, "axis", "sweep", c.sweep.axis);
    static const std::set<std::string> kAxes{"none", "defense", "batch_size", "q", "rounds"};
    require(kAxes.count(c.sweep.axis) > 0, ErrorKind::kConfig,
            "sweep.axis must be one of none, defense, batch_size, q, rounds; got '" + c.sweep.axis + "'");
    if (s.contains("values")) {
      require(s["values"].is_array(), ErrorKind::kConfig, "sweep.values must be an array");
      for (const auto& v : s["values"]) c.sweep.values.push_back(v);
    }
    for (std::size_t i = 0; i < c.sweep.values.size(); ++i) {
      const std::string path = "sweep.values[" + std::to_string(i) + "]";
      const Json& v = c.sweep.values[i];
      if (c.sweep.axis == "defense") {
        if (v.is_string()) {
          parse_defense_kind(v.get<std::string>());
          continue;
        }
        detail::parse_defense(v, path);
      } else if (c.sweep.axis == "q") {
        require(v.is_number(), ErrorKind::kConfig, "'" + path + "' must be a number");
        PartitionSpec ps = c.partition;
        ps.q = v.get<double>();
        require(ps.q >= 1.0 / static_cast<double>(ps.num_clients) - 1e-12 && ps.q <= 1, ErrorKind::kConfig,
                "'" + path + "' outside [1/N, 1]");
      } else {
        require(v.is_number_unsigned(), ErrorKind::kConfig, "'" + path + "' must be a non-negative integer");
      }
    }
  }

  if (j.contains("tune_k")) {
    check_keys(j["tune_k"], "tune_k", {"targets"});
    detail::read(j["tune_k"], "targets", "tune_k", c.tune_k_targets);
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kConfig, "cannot read config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::kConfig, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

// Defense for one sweep value: a kind name (default settings) or a full spec.
inline DefenseSpec defense_for_value(const Json& v, const DefenseSpec& base) {
  if (v.is_string()) {
    DefenseSpec d = base;
    d.kind = parse_defense_kind(v.get<std::string>());
    return d;
  }
  return detail::parse_defense(v, "sweep.value");
}

}  // namespace glens
