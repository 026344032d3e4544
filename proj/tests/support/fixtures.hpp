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

#include <filesystem>
#include <mutex>
#include <string>

#include "glens/glens.hpp"

namespace glens::testing {

inline std::filesystem::path assets_dir() { return GLENS_TEST_ASSETS; }
inline std::filesystem::path golden_dir() { return GLENS_TEST_GOLDEN; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(GLENS_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Recipe of the committed generator asset: conditional generator on 4000
// plain shapes, 10 epochs.
inline Dataset generator_training_data() { return make_shapes_dataset(4000, RngSeed{11}); }
inline constexpr std::uint64_t kGeneratorTrainSeed = 5;

// Loads the committed generator, retraining it from the recipe (about four
// minutes) when the asset is missing.
inline const GeneratorStack& shapes_generator() {
  static std::once_flag once;
  static GeneratorStack gen;
  std::call_once(once, [] {
    const auto path = assets_dir() / "shapes_generator.glns";
    if (std::filesystem::exists(path)) {
      gen = generator_from_checkpoint(load_checkpoint(path));
      return;
    }
    gen = train_generator(generator_training_data(), GeneratorTrainConfig{}, RngSeed{kGeneratorTrainSeed});
    save_checkpoint(generator_to_checkpoint(gen), path);
  });
  return gen;
}

inline FLRoundRecord record_for(const Classifier& model, const Dataset& pool, std::size_t batch, std::uint64_t seed,
                                std::optional<DefenseSpec> defense = std::nullopt) {
  return capture_round(classifier_to_checkpoint(model), pool, batch, defense, RngSeed{seed});
}

}  // namespace glens::testing
