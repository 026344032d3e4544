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
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "glens/attacks/attacks.hpp"
#include "glens/bench/report.hpp"
#include "glens/cli/config.hpp"
#include "glens/core/checkpoint.hpp"
#include "glens/core/log.hpp"
#include "glens/data/dataset.hpp"
#include "glens/flsim/flsim.hpp"
#include "glens/models/train.hpp"

namespace glens {

inline constexpr const char* kGlensVersion = "0.1.0";

struct RunOptions {
  std::size_t workers = 1;
  bool resume = false;
};

namespace fs = std::filesystem;

inline void apply_seed(ExperimentConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.partition.seed = RngSeed{seed};
  c.attack.config.seed = RngSeed{seed};
  c.source["seed"] = seed;
}

inline void write_manifest(const fs::path& dir, const ExperimentConfig& c, const std::string& command,
                           const Json& extra = Json::object()) {
  fs::create_directories(dir);
  Json m = {{"command", command},
            {"config_hash", config_hash(c.source)},
            {"seed", c.seed},
            {"glens_version", kGlensVersion},
            {"checkpoint_format_version", kCheckpointVersion}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

namespace detail {

inline fs::path out_dir(const ExperimentConfig& c) { return fs::path(c.output_dir); }

inline std::string number_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline Checkpoint require_checkpoint(const fs::path& path, const std::string& what) {
  require(fs::exists(path), ErrorKind::kMissingArtifact,
          what + " not found at '" + path.string() + "' (run the producing command first)");
  return load_checkpoint(path);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

// Sweep points: a name plus the value (null when there is no sweep).
struct SweepPoint {
  std::string name;
  Json value;
};

inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& c) {
  if (c.sweep.axis == "none" || c.sweep.values.empty()) return {{"default", nullptr}};
  std::vector<SweepPoint> points;
  for (const auto& v : c.sweep.values) {
    std::string name;
    if (c.sweep.axis == "defense") name = v.is_string() ? v.get<std::string>() : v.at("kind").get<std::string>();
    else if (c.sweep.axis == "batch_size") name = "B" + std::to_string(v.get<std::size_t>());
    else if (c.sweep.axis == "q") name = "q" + detail::number_tag(v.get<double>());
    else name = "r" + std::to_string(v.get<std::size_t>());
    points.push_back({name, v});
  }
  return points;
}

inline fs::path partition_dir(const ExperimentConfig& c, double q) {
  if (c.sweep.axis == "q") return detail::out_dir(c) / "data" / ("partition_q" + detail::number_tag(q));
  return detail::out_dir(c) / "data" / "partition";
}

inline fs::path fl_dir(const ExperimentConfig& c) { return detail::out_dir(c) / "fl"; }

// Generator/f_m training data, FL task data and held-out tuning images.
inline void cmd_prepare_data(const ExperimentConfig& c) {
  const fs::path data_dir = detail::out_dir(c) / "data";
  fs::create_directories(data_dir);
  const Rng root(RngSeed{c.seed});
  const auto& d = c.dataset;
  const Dataset train = make_shapes_dataset(d.size, root.fork("train-data").seed(), d.channels, d.side, d.style);
  Dataset fl = make_shapes_dataset(d.size, root.fork("fl-data").seed(), d.channels, d.side, d.target_style);
  Dataset heldout =
      make_shapes_dataset(d.heldout_size, root.fork("heldout-data").seed(), d.channels, d.side, d.target_style);
  if (!d.fl_label_permutation.empty()) {
    fl = permute_labels(fl, d.fl_label_permutation);
    heldout = permute_labels(heldout, d.fl_label_permutation);
  }
  save_checkpoint(dataset_to_checkpoint(train), data_dir / "train.glns");
  save_checkpoint(dataset_to_checkpoint(fl), data_dir / "fl.glns");
  save_checkpoint(dataset_to_checkpoint(heldout), data_dir / "heldout.glns");
  write_manifest(data_dir, c, "prepare-data",
                 {{"train_size", train.size()}, {"fl_size", fl.size()}, {"heldout_size", heldout.size()}});

  std::vector<double> qs{c.partition.q};
  if (c.sweep.axis == "q") {
    qs.clear();
    for (const auto& v : c.sweep.values) qs.push_back(v.get<double>());
  }
  for (double q : qs) {
    PartitionSpec spec = c.partition;
    spec.q = q;
    const Partition p = partition_indices(fl, spec);
    const fs::path dir = partition_dir(c, q);
    fs::create_directories(dir);
    Json counts = Json::array();
    for (std::size_t i = 0; i < p.indices.size(); ++i) {
      const Dataset client = fl.subset(p.indices[i]);
      save_checkpoint(dataset_to_checkpoint(client), dir / ("client_" + std::to_string(i) + ".glns"));
      std::vector<std::size_t> per_class(fl.num_classes, 0);
      for (int y : client.labels) ++per_class[static_cast<std::size_t>(y)];
      counts.push_back(per_class);
    }
    write_manifest(dir, c, "prepare-data",
                   {{"q", q}, {"num_clients", spec.num_clients}, {"home_client", p.home_client},
                    {"class_counts", counts}});
  }
}

inline std::vector<Dataset> load_clients(const ExperimentConfig& c, double q) {
  const fs::path dir = partition_dir(c, q);
  std::vector<Dataset> clients;
  for (std::size_t i = 0; i < c.partition.num_clients; ++i)
    clients.push_back(dataset_from_checkpoint(
        detail::require_checkpoint(dir / ("client_" + std::to_string(i) + ".glns"), "client partition")));
  return clients;
}

inline Dataset load_dataset(const ExperimentConfig& c, const std::string& name) {
  return dataset_from_checkpoint(
      detail::require_checkpoint(detail::out_dir(c) / "data" / (name + ".glns"), "dataset '" + name + "'"));
}

inline void write_training_log(const fs::path& path, const TrainingLog& log, bool append) {
  std::string text = append && fs::exists(path) ? read_text(path) : "epoch,loss,train_accuracy,val_accuracy,aux\n";
  for (const auto& e : log)
    text += std::to_string(e.epoch) + "," + format_number(e.loss, 9) + "," + format_number(e.train_accuracy) + "," +
            format_number(e.val_accuracy) + "," + format_number(e.aux) + "\n";
  write_text(path, text);
}

inline ClassifierTrainConfig central_config(const ExperimentConfig& c) {
  ClassifierTrainConfig t;
  t.architecture = c.global_model.architecture;
  t.width = c.global_model.width;
  t.epochs = c.global_model.epochs;
  t.batch_size = c.global_model.batch_size;
  t.lr = c.global_model.lr;
  return t;
}

// Centrally trained classifier on the generator's training data (the label
// mapping classifier f_m). Saves one checkpoint per epoch for resuming.
inline void cmd_train_global(const ExperimentConfig& c, const RunOptions& opt = {}) {
  const Dataset train = load_dataset(c, "train");
  const fs::path dir = detail::out_dir(c) / "models";
  fs::create_directories(dir);
  const ClassifierTrainConfig cfg = central_config(c);
  const RngSeed seed = Rng(RngSeed{c.seed}).fork("train-global").seed();
  Classifier model;
  std::size_t start = 0;
  if (opt.resume) {
    for (std::size_t e = cfg.epochs; e > 0; --e) {
      const fs::path p = dir / ("global_epoch_" + std::to_string(e) + ".glns");
      if (fs::exists(p)) {
        model = classifier_from_checkpoint(load_checkpoint(p));
        start = e;
        break;
      }
    }
  }
  if (start == 0) {
    model = make_classifier(cfg.architecture, train.image_shape(), train.num_classes, Rng(seed).fork("init").seed(),
                            cfg.width);
    save_checkpoint(classifier_to_checkpoint(model), dir / "global_epoch_0.glns");
  }
  TrainingLog log;
  for (std::size_t e = start; e < cfg.epochs; ++e) {
    continue_training(model, train, cfg, seed, e, e + 1, &log);
    save_checkpoint(classifier_to_checkpoint(model), dir / ("global_epoch_" + std::to_string(e + 1) + ".glns"));
  }
  save_checkpoint(classifier_to_checkpoint(model), dir / "global.glns");
  write_training_log(dir / "global_curve.csv", log, start > 0);
  write_manifest(dir, c, "train-global", {{"epochs", cfg.epochs}, {"resumed_from_epoch", start}});
}

inline void cmd_train_generator(const ExperimentConfig& c) {
  const Dataset train = load_dataset(c, "train");
  const fs::path dir = detail::out_dir(c) / "models";
  fs::create_directories(dir);
  TrainingLog log;
  const GeneratorStack gen =
      train_generator(train, c.generator, Rng(RngSeed{c.seed}).fork("train-generator").seed(), &log);
  save_checkpoint(generator_to_checkpoint(gen), dir / "generator.glns");
  write_training_log(dir / "generator_curve.csv", log, false);
  Rng rng(RngSeed{c.seed});
  std::vector<Tensor> rows;
  for (int r = 0; r < 4; ++r) {
    std::vector<int> labels(gen.spec().num_classes);
    std::iota(labels.begin(), labels.end(), 0);
    rows.push_back(gen.generate(sample_latents(gen, labels.size(), rng), labels));
  }
  if (gen.spec().image_shape[0] == 1 || gen.spec().image_shape[0] == 3)
    write_png(dir / "generator_samples.png", image_grid(rows));
  write_manifest(dir, c, "train-generator", {{"epochs", c.generator.epochs}});
}

inline Classifier initial_global(const ExperimentConfig& c, const Shape& image_shape, std::size_t num_classes) {
  return make_classifier(c.global_model.architecture, image_shape, num_classes,
                         Rng(RngSeed{c.seed}).fork("global-init").seed(), c.global_model.width);
}

inline fs::path fl_round_path(const ExperimentConfig& c, double q, std::size_t r) {
  fs::path dir = fl_dir(c);
  if (c.sweep.axis == "q") dir = detail::out_dir(c) / ("fl_q" + detail::number_tag(q));
  return dir / ("round_" + std::to_string(r) + ".glns");
}

// FedAvg from the seeded initial global model; round_<r>.glns holds the
// model after r rounds.
inline void cmd_train_fl(const ExperimentConfig& c, const RunOptions& opt = {}) {
  std::size_t rounds = c.global_model.rounds;
  if (c.sweep.axis == "rounds")
    for (const auto& v : c.sweep.values) rounds = std::max(rounds, v.get<std::size_t>());
  std::vector<double> qs{c.partition.q};
  if (c.sweep.axis == "q") {
    qs.clear();
    for (const auto& v : c.sweep.values) qs.push_back(v.get<double>());
  }
  FedAvgConfig cfg;
  cfg.rounds = rounds;
  cfg.clients_per_round = c.global_model.clients_per_round;
  cfg.lr = c.global_model.fl_lr;
  cfg.local_batch = c.global_model.local_batch;
  const RngSeed seed = Rng(RngSeed{c.seed}).fork("fedavg").seed();
  for (double q : qs) {
    const std::vector<Dataset> clients = load_clients(c, q);
    const fs::path dir = fl_round_path(c, q, 0).parent_path();
    fs::create_directories(dir);
    Classifier global;
    std::size_t start = 0;
    if (opt.resume) {
      for (std::size_t r = rounds + 1; r-- > 0;)
        if (fs::exists(fl_round_path(c, q, r))) {
          global = classifier_from_checkpoint(load_checkpoint(fl_round_path(c, q, r)));
          start = r;
          break;
        }
    }
    if (start == 0 && !(opt.resume && fs::exists(fl_round_path(c, q, 0)))) {
      global = initial_global(c, clients.at(0).image_shape(), clients.at(0).num_classes);
      save_checkpoint(classifier_to_checkpoint(global), fl_round_path(c, q, 0));
    }
    const std::vector<double> losses =
        fedavg_rounds(global, clients, cfg, seed, start, rounds, [&](std::size_t r, const Classifier& m) {
          save_checkpoint(classifier_to_checkpoint(m), fl_round_path(c, q, r));
        });
    const fs::path curve = dir / "curve.csv";
    std::string text = start > 0 && fs::exists(curve) ? read_text(curve) : "round,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i)
      text += std::to_string(start + i + 1) + "," + format_number(losses[i], 9) + "\n";
    write_text(curve, text);
    write_manifest(dir, c, "train-fl", {{"rounds", rounds}, {"q", q}, {"resumed_from_round", start}});
  }
}

// Global checkpoint for a given FL round; round 0 falls back to the seeded
// initialization when train-fl has not been run.
inline Checkpoint global_checkpoint(const ExperimentConfig& c, double q, std::size_t round, const Dataset& like) {
  const fs::path p = fl_round_path(c, q, round);
  if (fs::exists(p)) return load_checkpoint(p);
  require(round == 0, ErrorKind::kMissingArtifact,
          "FL checkpoint for round " + std::to_string(round) + " not found at '" + p.string() + "' (run train-fl)");
  return classifier_to_checkpoint(initial_global(c, like.image_shape(), like.num_classes));
}

inline fs::path records_dir(const ExperimentConfig& c, const std::string& point) {
  return detail::out_dir(c) / "records" / point;
}

// Captures attack.targets victim rounds per sweep point.
inline void cmd_capture(const ExperimentConfig& c) {
  for (const SweepPoint& pt : sweep_points(c)) {
    double q = c.partition.q;
    std::size_t batch = c.attack.batch_size, round = c.attack.round;
    DefenseSpec defense = c.defense;
    if (c.sweep.axis == "q") q = pt.value.get<double>();
    if (c.sweep.axis == "batch_size") batch = pt.value.get<std::size_t>();
    if (c.sweep.axis == "rounds") round = pt.value.get<std::size_t>();
    if (c.sweep.axis == "defense") defense = defense_for_value(pt.value, c.defense);
    const std::vector<Dataset> clients = load_clients(c, q);
    require(c.attack.victim_client < clients.size(), ErrorKind::kConfig, "attack.victim_client out of range");
    const Dataset& victim = clients[c.attack.victim_client];
    const Checkpoint global = global_checkpoint(c, q, round, victim);
    const fs::path dir = records_dir(c, pt.name);
    for (std::size_t t = 0; t < c.attack.targets; ++t) {
      const RngSeed seed = Rng(RngSeed{c.seed}).fork("capture").fork(t).seed();
      DefenseSpec d = defense;
      d.seed = Rng(seed).fork("defense-noise").seed();
      const std::optional<DefenseSpec> maybe = d.kind == DefenseKind::kNone ? std::nullopt : std::optional(d);
      const FLRoundRecord rec = capture_round(global, victim, batch, maybe, seed, c.attack.unique_labels, round);
      save_round_record(rec, dir / ("target_" + std::to_string(t)));
    }
    write_manifest(dir, c, "capture",
                   {{"point", pt.name}, {"targets", c.attack.targets}, {"batch_size", batch}, {"round", round},
                    {"q", q}, {"defense", defense_to_json(defense)}});
  }
}

// Report directory: recon.png, truth.png, curves.csv and manifest.json.
inline void save_report(const ReconstructionReport& rep, const Tensor& truth, const fs::path& dir,
                        const std::string& hash) {
  fs::create_directories(dir);
  write_text(dir / "curves.csv", curves_csv(rep.stages));
  if (!rep.coarse_stages.empty()) write_text(dir / "coarse_curves.csv", curves_csv(rep.coarse_stages));
  save_checkpoint(Checkpoint{kCheckpointVersion, {{"images", rep.final_images}}, {}}, dir / "recon.glns");
  if (truth.dim(1) == 1 || truth.dim(1) == 3) write_png(dir / "recon.png", image_grid({truth, rep.final_images}));
  Json m = {{"config_hash", hash},
            {"method", rep.method},
            {"chosen_stage", rep.chosen_stage},
            {"best_loss", rep.best_loss},
            {"best_match", rep.best_match},
            {"trial_index", rep.trial_index},
            {"trial_losses", rep.trial_losses},
            {"transform", rep.transform_kind},
            {"labels", rep.labels_used.labels},
            {"label_method", to_string(rep.labels_used.method)},
            {"label_note", rep.labels_used.confidence_note},
            {"generator_labels", rep.generator_labels}};
  if (rep.initial_labels) m["initial_labels"] = rep.initial_labels->labels;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

inline std::size_t count_targets(const fs::path& dir) {
  std::size_t n = 0;
  while (fs::exists(dir / ("target_" + std::to_string(n)))) ++n;
  return n;
}

inline std::string method_label(AttackMethod m, bool mapping) {
  return m == AttackMethod::kGifd && mapping ? "gifd-mapped" : to_string(m);
}

// Runs every configured method on every captured record of every sweep
// point and emits one results table per point.
inline void cmd_attack(const ExperimentConfig& c, const RunOptions& opt = {}) {
  const std::string hash = config_hash(c.source);
  const bool needs_gen = std::any_of(c.attack.methods.begin(), c.attack.methods.end(),
                                     [](AttackMethod m) { return m != AttackMethod::kPixel; });
  std::optional<GeneratorStack> gen;
  if (needs_gen)
    gen = generator_from_checkpoint(
        detail::require_checkpoint(detail::out_dir(c) / "models" / "generator.glns", "generator checkpoint"));
  std::optional<Classifier> f_m;
  if (c.attack.label_mapping)
    f_m = classifier_from_checkpoint(
        detail::require_checkpoint(detail::out_dir(c) / "models" / "global.glns", "label-mapping classifier"));

  for (const SweepPoint& pt : sweep_points(c)) {
    const fs::path rdir = records_dir(c, pt.name);
    const std::size_t n = count_targets(rdir);
    require(n > 0, ErrorKind::kMissingArtifact, "no captured records under '" + rdir.string() + "' (run capture)");
    const fs::path out = detail::out_dir(c) / "attack" / pt.name;
    struct Job {
      std::size_t target;
      AttackMethod method;
    };
    std::vector<Job> jobs;
    for (std::size_t t = 0; t < n; ++t)
      for (AttackMethod m : c.attack.methods) jobs.push_back({t, m});
    std::vector<BenchResult> results(jobs.size());
    detail::parallel_for(jobs.size(), opt.workers, [&](std::size_t j) {
      const FLRoundRecord rec = load_round_record(rdir / ("target_" + std::to_string(jobs[j].target)));
      AttackConfig cfg = c.attack.config;
      cfg.method = jobs[j].method;
      cfg.seed = Rng(RngSeed{c.seed}).fork("attack").fork(jobs[j].target).seed();
      const bool mapping = c.attack.label_mapping && cfg.method == AttackMethod::kGifd;
      const ReconstructionReport rep = mapping ? attack_gifd_with_mapping(rec, *gen, *f_m, cfg)
                                               : run_attack(rec, gen ? &*gen : nullptr, cfg);
      const std::string label = method_label(cfg.method, mapping);
      results[j] = make_result(label, jobs[j].target, rep, rec.victim_batch.pixels);
      save_report(rep, rec.victim_batch.pixels, out / "reports" / (label + "_" + std::to_string(jobs[j].target)), hash);
    });
    emit_report(results, out);
    write_manifest(out, c, "attack", {{"point", pt.name}, {"axis", c.sweep.axis}, {"targets", n}});
  }
}

struct TuneKResult {
  std::vector<double> psnr;  // index K
  std::size_t recommended = 0;
};

// Runs gifd for every K in 0..N on held-out images and recommends the K
// with the highest mean PSNR (ties keep the smaller K).
inline TuneKResult cmd_tune_k(const ExperimentConfig& c, const RunOptions& opt = {}) {
  const GeneratorStack gen = generator_from_checkpoint(
      detail::require_checkpoint(detail::out_dir(c) / "models" / "generator.glns", "generator checkpoint"));
  const std::size_t depth = gen.depth();
  require(c.attack.config.radii.size() >= depth, ErrorKind::kConfig,
          "tune-k needs " + std::to_string(depth) + " radii (one per generator layer)");
  const Dataset heldout = load_dataset(c, "heldout");
  const Checkpoint global = global_checkpoint(c, c.partition.q, c.attack.round, heldout);
  std::vector<FLRoundRecord> records;
  for (std::size_t t = 0; t < c.tune_k_targets; ++t)
    records.push_back(capture_round(global, heldout, c.attack.batch_size, std::nullopt,
                                    Rng(RngSeed{c.seed}).fork("tune-k").fork(t).seed(), c.attack.unique_labels));
  std::vector<std::vector<MetricResult>> metrics(depth + 1, std::vector<MetricResult>(records.size()));
  detail::parallel_for((depth + 1) * records.size(), opt.workers, [&](std::size_t j) {
    const std::size_t K = j / records.size(), t = j % records.size();
    AttackConfig cfg = c.attack.config;
    cfg.method = AttackMethod::kGifd;
    cfg.K = K;
    cfg.seed = Rng(RngSeed{c.seed}).fork("tune-k-attack").fork(t).seed();
    const ReconstructionReport rep = attack_gifd(records[t], gen, cfg);
    metrics[K][t] = evaluate(rep.final_images, records[t].victim_batch.pixels);
  });
  TuneKResult res;
  std::string csv = "K,psnr_mean,ssim_mean,mse_mean\n";
  for (std::size_t K = 0; K <= depth; ++K) {
    double p = 0, s = 0, e = 0;
    for (const auto& m : metrics[K]) {
      p += m.psnr;
      s += m.ssim;
      e += m.mse;
    }
    const double n = static_cast<double>(records.size());
    res.psnr.push_back(p / n);
    csv += std::to_string(K) + "," + format_number(p / n) + "," + format_number(s / n) + "," + format_number(e / n, 9) +
           "\n";
    if (p / n > res.psnr[res.recommended]) res.recommended = K;
  }
  const fs::path dir = detail::out_dir(c) / "tune_k";
  fs::create_directories(dir);
  write_text(dir / "tune_k.csv", csv);
  write_manifest(dir, c, "tune-k",
                 {{"recommended_K", res.recommended}, {"psnr_at_recommended", res.psnr[res.recommended]},
                  {"targets", records.size()}});
  return res;
}

// Collects every attack point's table into report/summary.csv and seed-paired
// comparisons of gifd against each other method into report/paired.csv.
inline void cmd_report(const ExperimentConfig& c) {
  const fs::path attack_dir = detail::out_dir(c) / "attack";
  require(fs::is_directory(attack_dir), ErrorKind::kMissingArtifact,
          "no attack results under '" + attack_dir.string() + "' (run attack)");
  std::vector<std::string> points;
  for (const auto& e : fs::directory_iterator(attack_dir))
    if (fs::exists(e.path() / "results.csv")) points.push_back(e.path().filename().string());
  std::sort(points.begin(), points.end());
  std::string summary = "section,method,n,psnr_mean,ssim_mean,mse_mean\n";
  std::string paired = "section,method_a,method_b,metric,mean_a,mean_b,wins,losses,ties,win_rate,p_value\n";
  for (const auto& p : points) {
    const auto rows = parse_results_csv(read_text(attack_dir / p / "results.csv"));
    std::map<std::string, std::vector<MetricResult>> by_method;
    std::vector<std::string> order;
    for (const auto& r : rows) {
      if (!by_method.count(r.method)) order.push_back(r.method);
      by_method[r.method].push_back({r.psnr, r.ssim, r.mse, std::nullopt, false});
    }
    for (const auto& m : order) {
      double ps = 0, ss = 0, ms = 0;
      for (const auto& v : by_method[m]) {
        ps += v.psnr;
        ss += v.ssim;
        ms += v.mse;
      }
      const double n = static_cast<double>(by_method[m].size());
      summary += p + "," + m + "," + std::to_string(by_method[m].size()) + "," + format_number(ps / n) + "," +
                 format_number(ss / n) + "," + format_number(ms / n, 9) + "\n";
    }
    for (const std::string a : {"gifd", "gifd-mapped"}) {
      if (!by_method.count(a)) continue;
      for (const auto& b : order) {
        if (b == a || by_method[b].size() != by_method[a].size()) continue;
        for (const auto& s : paired_compare(by_method[a], by_method[b]))
          paired += p + "," + a + "," + b + "," + s.metric + "," + format_number(s.mean_a, 9) + "," +
                    format_number(s.mean_b, 9) + "," + std::to_string(s.wins) + "," + std::to_string(s.losses) + "," +
                    std::to_string(s.ties) + "," + format_number(s.win_rate) + "," + format_number(s.p_value, 9) +
                    "\n";
      }
    }
  }
  const fs::path dir = detail::out_dir(c) / "report";
  fs::create_directories(dir);
  write_text(dir / "summary.csv", summary);
  write_text(dir / "paired.csv", paired);
  write_manifest(dir, c, "report", {{"sections", points}});
}

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kMissingArtifact: return 3;
    case ErrorKind::kDivergence: return 4;
    default: return 1;
  }
}

}  // namespace glens
