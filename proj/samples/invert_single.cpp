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
// Reconstructs one image from its gradient with the latent-only and the
// staged attack, then writes truth and both reconstructions to a PNG grid.
#include <cstdio>
#include <string>

#include "glens/glens.hpp"

using namespace glens;

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s GENERATOR.glns [OUT.png]\n", argv[0]);
    return 2;
  }
  const std::string out = argc > 2 ? argv[2] : "invert_single.png";
  try {
    const GeneratorStack gen = generator_from_checkpoint(load_checkpoint(argv[1]));
    const Dataset data = make_shapes_dataset(50, RngSeed{7});
    const Classifier model = make_classifier("convnet4", {1, 32, 32}, data.num_classes, RngSeed{8});
    const FLRoundRecord rec = capture_round(classifier_to_checkpoint(model), data, 1, std::nullopt, RngSeed{9});

    AttackConfig cfg;
    cfg.iters_per_stage = 200;
    cfg.trials = 1;
    const Tensor& truth = rec.victim_batch.pixels;
    std::vector<Tensor> rows{truth};
    for (const ReconstructionReport& r : {attack_latent(rec, gen, cfg), attack_gifd(rec, gen, cfg)}) {
      const MetricResult m = evaluate(r.final_images, truth);
      std::printf("%-7s stage %-8s psnr %6.2f  ssim %.3f\n", r.method.c_str(), r.chosen_stage.c_str(), m.psnr,
                  m.ssim);
      rows.push_back(r.final_images);
    }
    write_png(out, image_grid(rows));
    std::printf("wrote %s\n", out.c_str());
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
