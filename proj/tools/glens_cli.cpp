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
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "glens/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"glens: generator-guided gradient inversion toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", glens::kGlensVersion);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t workers = 1;
  bool resume = false;
  bool verbose = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "override the output directory");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("-v,--verbose", verbose, "log progress");
  };

  struct Command {
    const char* name;
    const char* help;
    bool resumable;
  };
  const Command commands[] = {
      {"prepare-data", "render datasets and client partitions", false},
      {"train-global", "train the central classifier used for label mapping", true},
      {"train-generator", "train the conditional generator", false},
      {"train-fl", "run FedAvg and checkpoint every round", true},
      {"capture", "record victim rounds (batch, shared gradients, defense)", false},
      {"attack", "run the configured attacks on captured rounds", false},
      {"tune-k", "pick the intermediate depth on held-out images", false},
      {"report", "aggregate attack results and paired comparisons", false},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    if (c.resumable) sub->add_flag("--resume", resume, "continue from the latest checkpoint");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (verbose) glens::set_log_level(glens::LogLevel::kInfo);
    glens::ExperimentConfig cfg = glens::load_config(config_path);
    if (seed) glens::apply_seed(cfg, *seed);
    if (!out.empty()) {
      cfg.output_dir = out;
      cfg.source["output_dir"] = out;
    }
    const glens::RunOptions opt{workers, resume};
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "prepare-data") glens::cmd_prepare_data(cfg);
    else if (name == "train-global") glens::cmd_train_global(cfg, opt);
    else if (name == "train-generator") glens::cmd_train_generator(cfg);
    else if (name == "train-fl") glens::cmd_train_fl(cfg, opt);
    else if (name == "capture") glens::cmd_capture(cfg);
    else if (name == "attack") glens::cmd_attack(cfg, opt);
    else if (name == "tune-k") {
      const auto res = glens::cmd_tune_k(cfg, opt);
      std::cout << "recommended K = " << res.recommended << " (mean PSNR " << res.psnr[res.recommended] << " dB)\n";
    } else glens::cmd_report(cfg);
    return 0;
  } catch (const glens::Error& e) {
    std::cerr << "glens: " << e.what() << '\n';
    return glens::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "glens: " << e.what() << '\n';
    return 1;
  }
}
