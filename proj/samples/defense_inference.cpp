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
// Captures one client gradient, applies each defense, and shows what the
// attacker recovers from the shared gradient alone.
#include <cstdio>

#include "glens/glens.hpp"

using namespace glens;

int main() {
  const Dataset data = make_shapes_dataset(200, RngSeed{1});
  const Classifier model = make_classifier("convnet4", {1, 32, 32}, data.num_classes, RngSeed{2});
  const Checkpoint global = classifier_to_checkpoint(model);

  const FLRoundRecord clean = capture_round(global, data, 1, std::nullopt, RngSeed{3});
  std::printf("true label %d, extracted %d\n", (*clean.victim_batch.labels)[0],
              extract_single_label(clean.shared_gradients));

  DefenseSpec clip{.kind = DefenseKind::kClip};
  clip.clip_bound = 0.05;
  DefenseSpec sparse{.kind = DefenseKind::kSparsify};
  DefenseSpec soteria{.kind = DefenseKind::kSoteria};
  for (const DefenseSpec& d : {clip, sparse, soteria}) {
    const FLRoundRecord rec = capture_round(global, data, 1, d, RngSeed{3});
    const InferredTransform t = infer_transform(rec.shared_gradients);
    std::printf("%-9s -> inferred %s\n", to_string(d.kind).c_str(), to_string(t.kind).c_str());
  }
  return 0;
}
