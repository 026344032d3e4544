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
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glens/bench/png.hpp"
#include "glens/core/checkpoint.hpp"
#include "glens/core/error.hpp"
#include "glens/core/rng.hpp"
#include "glens/core/types.hpp"
#include "glens/data/dataset.hpp"
#include "glens/defenses/defenses.hpp"
#include "glens/models/classifier.hpp"

namespace glens {

struct PartitionSpec {
  std::size_t num_clients = 10;
  double q = 0.1;  // 1 / num_clients is IID
  RngSeed seed{0};

  void validate() const {
    require(num_clients >= 2, ErrorKind::kInvalidArgument, "partition needs at least 2 clients");
    const double lo = 1.0 / static_cast<double>(num_clients);
    require(q >= lo - 1e-12 && q <= 1.0, ErrorKind::kInvalidArgument,
            "q = " + std::to_string(q) + " outside [1/N, 1] = [" + std::to_string(lo) + ", 1]");
  }
};

struct Partition {
  std::vector<int> home_client;                   // per class
  std::vector<std::vector<std::size_t>> indices;  // per client, ascending
};

// Each class gets a home client (a seeded permutation of classes dealt round
// robin over clients); a sample goes to its home client with probability q,
// otherwise to one of the other clients uniformly.
inline Partition partition_indices(const Dataset& data, const PartitionSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Partition p;
  p.home_client.assign(data.num_classes, 0);
  const std::vector<std::size_t> classes = rng.fork("homes").permutation(data.num_classes);
  for (std::size_t i = 0; i < classes.size(); ++i) p.home_client[classes[i]] = static_cast<int>(i % spec.num_clients);
  p.indices.resize(spec.num_clients);
  Rng draw = rng.fork("assign");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto home = static_cast<std::size_t>(p.home_client[static_cast<std::size_t>(data.labels[i])]);
    std::size_t client = home;
    if (draw.uniform() >= spec.q) {
      client = draw.uniform_index(spec.num_clients - 1);
      if (client >= home) ++client;
    }
    p.indices[client].push_back(i);
  }
  return p;
}

inline std::vector<Dataset> partition_dataset(const Dataset& data, const PartitionSpec& spec) {
  const Partition p = partition_indices(data, spec);
  std::vector<Dataset> clients;
  for (const auto& idx : p.indices) clients.push_back(data.subset(idx));
  return clients;
}

// One local step's gradient on the client's batch.
inline GradientSet client_local_gradients(const Classifier& global, const ImageBatch& batch) {
  return loss_and_gradients(global, batch).grads;
}

struct FedAvgConfig {
  std::size_t rounds = 0;
  std::size_t clients_per_round = 1;
  double lr = 0.05;
  std::size_t local_batch = 32;
};

struct FedAvgResult {
  std::vector<Checkpoint> checkpoints;  // index r = global model after r rounds
  std::vector<double> round_loss;       // mean client loss before each round's update
};

// Runs rounds [start_round, end_round) of FedAvg in place. Every round draws
// from its own forked stream, so resuming at any round is exact.
inline std::vector<double> fedavg_rounds(Classifier& global, const std::vector<Dataset>& clients,
                                         const FedAvgConfig& cfg, RngSeed seed, std::size_t start_round,
                                         std::size_t end_round,
                                         const std::function<void(std::size_t, const Classifier&)>& on_round = {}) {
  require(!clients.empty() && cfg.clients_per_round >= 1, ErrorKind::kInvalidArgument,
          "FedAvg needs at least one client per round");
  require(cfg.clients_per_round <= clients.size(), ErrorKind::kInvalidArgument,
          "clients per round exceeds the number of clients");
  std::vector<double> losses;
  const Rng root(seed);
  for (std::size_t r = start_round; r < end_round; ++r) {
    Rng rng = root.fork(r);
    std::vector<std::size_t> chosen = rng.permutation(clients.size());
    chosen.resize(cfg.clients_per_round);
    std::sort(chosen.begin(), chosen.end());
    std::vector<Tensor> sum;
    double loss = 0;
    std::size_t used = 0;
    for (std::size_t c : chosen) {
      const Dataset& data = clients[c];
      if (data.size() == 0) continue;
      Rng local = rng.fork(c + 1);
      std::vector<std::size_t> idx = local.permutation(data.size());
      idx.resize(std::min(cfg.local_batch, idx.size()));
      const LossAndGradients lg = loss_and_gradients(global, data.batch(idx));
      if (!std::isfinite(lg.loss)) fail(ErrorKind::kDivergence, "client loss non-finite in round " + std::to_string(r));
      loss += lg.loss;
      std::vector<Tensor> local_params = global.net.params();
      for (std::size_t i = 0; i < local_params.size(); ++i)
        axpy(static_cast<Real>(-cfg.lr), lg.grads[i].value, local_params[i]);
      if (sum.empty()) {
        sum = std::move(local_params);
      } else {
        for (std::size_t i = 0; i < sum.size(); ++i) add_inplace(sum[i], local_params[i]);
      }
      ++used;
    }
    require(used > 0, ErrorKind::kInvalidArgument, "round " + std::to_string(r) + " selected only empty clients");
    if (used == 1) {
      global.net.params() = std::move(sum);
    } else {
      for (std::size_t i = 0; i < sum.size(); ++i) {
        Tensor& p = global.net.params()[i];
        for (std::size_t j = 0; j < p.size(); ++j) p[j] = static_cast<Real>(sum[i][j] / static_cast<double>(used));
      }
    }
    losses.push_back(loss / static_cast<double>(used));
    if (on_round) on_round(r + 1, global);
  }
  return losses;
}

inline FedAvgResult fedavg_train(const Classifier& initial, const std::vector<Dataset>& clients,
                                 const FedAvgConfig& cfg, RngSeed seed) {
  FedAvgResult out;
  Classifier global = initial;
  out.checkpoints.push_back(classifier_to_checkpoint(global));
  out.round_loss = fedavg_rounds(global, clients, cfg, seed, 0, cfg.rounds, [&](std::size_t, const Classifier& m) {
    out.checkpoints.push_back(classifier_to_checkpoint(m));
  });
  return out;
}

struct FLRoundRecord {
  std::size_t round_index = 0;
  Checkpoint global_before;
  ImageBatch victim_batch;  // ground truth, evaluation only
  GradientSet shared_gradients;
  DefenseSpec defense;
  std::uint64_t seed = 0;
};

// Draws B distinct samples (distinct labels when `unique_labels`), computes
// the victim's gradient on the global model and applies the defense. The
// batch is ordered by label.
inline FLRoundRecord capture_round(const Checkpoint& global_ckpt, const Dataset& victim, std::size_t batch_size,
                                   const std::optional<DefenseSpec>& defense, RngSeed seed, bool unique_labels = true,
                                   std::size_t round_index = 0) {
  require(batch_size >= 1, ErrorKind::kInvalidArgument, "batch size must be >= 1");
  require(victim.size() >= batch_size, ErrorKind::kUnsatisfiable,
          "victim holds " + std::to_string(victim.size()) + " samples, need " + std::to_string(batch_size));
  const Classifier model = classifier_from_checkpoint(global_ckpt);
  Rng rng(seed);
  std::vector<std::size_t> idx;
  std::set<int> seen;
  for (std::size_t i : rng.fork("batch").permutation(victim.size())) {
    if (idx.size() == batch_size) break;
    if (unique_labels && !seen.insert(victim.labels[i]).second) continue;
    idx.push_back(i);
  }
  require(idx.size() == batch_size, ErrorKind::kUnsatisfiable,
          "victim data has only " + std::to_string(idx.size()) + " distinct labels, cannot draw a batch of " +
              std::to_string(batch_size) + " with unique labels");
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return victim.labels[a] < victim.labels[b]; });

  FLRoundRecord rec;
  rec.round_index = round_index;
  rec.global_before = global_ckpt;
  rec.victim_batch = victim.batch(idx);
  rec.seed = seed.value;
  const GradientSet raw = client_local_gradients(model, rec.victim_batch);
  if (defense) {
    rec.defense = *defense;
    rec.shared_gradients = apply_defense(*defense, raw, model, rec.victim_batch);
  } else {
    rec.shared_gradients = raw;
  }
  return rec;
}

inline nlohmann::json defense_to_json(const DefenseSpec& d) {
  return {{"kind", to_string(d.kind)},           {"noise_std", d.noise_std},
          {"clip_bound", d.clip_bound},          {"prune_rate", d.prune_rate},
          {"soteria_rate", d.soteria_rate},      {"defended_layer", d.defended_layer},
          {"seed", d.seed.value}};
}

inline DefenseSpec defense_from_json(const nlohmann::json& j) {
  DefenseSpec d;
  d.kind = parse_defense_kind(j.at("kind").get<std::string>());
  d.noise_std = j.value("noise_std", d.noise_std);
  d.clip_bound = j.value("clip_bound", d.clip_bound);
  d.prune_rate = j.value("prune_rate", d.prune_rate);
  d.soteria_rate = j.value("soteria_rate", d.soteria_rate);
  d.defended_layer = j.value("defended_layer", d.defended_layer);
  d.seed = RngSeed{j.value("seed", std::uint64_t{0})};
  return d;
}

// Directory layout: global.glns, gradients.glns, truth.glns (exact pixels
// and labels), truth.png (one tile per sample) and manifest.json.
inline void save_round_record(const FLRoundRecord& rec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_checkpoint(rec.global_before, dir / "global.glns");
  save_checkpoint(rec.shared_gradients.to_checkpoint(), dir / "gradients.glns");
  Checkpoint truth;
  truth.tensors.push_back({"pixels", rec.victim_batch.pixels});
  Tensor labels({rec.victim_batch.batch_size()});
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<Real>((*rec.victim_batch.labels)[i]);
  truth.tensors.push_back({"labels", labels});
  save_checkpoint(truth, dir / "truth.glns");
  const Tensor& px = rec.victim_batch.pixels;
  if (px.dim(1) == 1 || px.dim(1) == 3) write_png(dir / "truth.png", image_grid({px}));
  nlohmann::json m = {{"round_index", rec.round_index},
                      {"seed", rec.seed},
                      {"batch_size", rec.victim_batch.batch_size()},
                      {"defense", defense_to_json(rec.defense)}};
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
}

inline FLRoundRecord load_round_record(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorKind::kMissingArtifact, "no round record at '" + dir.string() + "'");
  std::ifstream in(dir / "manifest.json");
  require(in.good(), ErrorKind::kMissingArtifact, "missing '" + (dir / "manifest.json").string() + "'");
  const nlohmann::json m = nlohmann::json::parse(in);
  FLRoundRecord rec;
  rec.round_index = m.at("round_index").get<std::size_t>();
  rec.seed = m.at("seed").get<std::uint64_t>();
  rec.defense = defense_from_json(m.at("defense"));
  rec.global_before = load_checkpoint(dir / "global.glns");
  rec.shared_gradients = GradientSet::from_checkpoint(load_checkpoint(dir / "gradients.glns"));
  const Checkpoint truth = load_checkpoint(dir / "truth.glns");
  rec.victim_batch.pixels = truth.at("pixels");
  std::vector<int> labels;
  for (Real v : truth.at("labels").values()) labels.push_back(static_cast<int>(v));
  rec.victim_batch.labels = std::move(labels);
  return rec;
}

}  // namespace glens
