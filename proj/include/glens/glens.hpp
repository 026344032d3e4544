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

#include "glens/attacks/attacks.hpp"
#include "glens/attacks/optim.hpp"
#include "glens/bench/metrics.hpp"
#include "glens/bench/png.hpp"
#include "glens/bench/report.hpp"
#include "glens/core/checkpoint.hpp"
#include "glens/core/error.hpp"
#include "glens/core/log.hpp"
#include "glens/core/rng.hpp"
#include "glens/core/tensor.hpp"
#include "glens/core/types.hpp"
#include "glens/data/dataset.hpp"
#include "glens/defenses/defenses.hpp"
#include "glens/flsim/flsim.hpp"
#include "glens/gradmatch.hpp"
#include "glens/labels/labels.hpp"
#include "glens/models/classifier.hpp"
#include "glens/models/generator.hpp"
#include "glens/models/layers.hpp"
#include "glens/models/sequential.hpp"
#include "glens/models/train.hpp"
