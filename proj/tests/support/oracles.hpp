/*
 * Copyright 2026 The easyhard Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Slow, independent reference computations used only by the tests. None of
// these call into the library code paths they are compared against.

#pragma once

#include <optional>
#include <random>
#include <vector>

#include "easyhard/core_data.hpp"
#include "easyhard/voc_eval.hpp"

namespace easyhard::oracle {

// mAP by re-simulating the greedy protocol from scratch on every prefix of
// the global ranking, then integrating precision over each recall step.
double brute_force_map(const Dataset& dataset, const std::vector<Detection>& detections,
                       const EvalConfig& config);

// tau-b from explicit enumeration of all n(n-1)/2 pairs.
std::optional<double> kendall_tau_pairs(const std::vector<double>& x, const std::vector<double>& y);

struct SvrDualOptimum {
  std::vector<double> coef;  // a - a*
  double objective = 0.0;    // 1/2 c'Kc - y'c
  std::size_t patterns_tried = 0;
};

// Exact minimizer of the linear nu-SVR dual by enumerating KKT patterns
// (each sample at -C/n, free negative, 0, free positive or +C/n; budget
// constraint active or not). Intended for n <= 10, d <= 3 in general
// position; throws std::runtime_error if no pattern certifies optimality.
SvrDualOptimum nu_svr_dual_oracle(const std::vector<std::vector<double>>& x,
                                  const std::vector<double>& y, double nu, double c);

// Random tiny evaluation instance: <= max_images images, <= max_dets
// detections, <= max_classes classes, boxes on a coarse grid so IoU and
// score ties occur.
struct TinyInstance {
  Dataset dataset;
  std::vector<Detection> detections;
};
TinyInstance random_tiny_instance(std::mt19937_64& rng, int max_images = 4, int max_dets = 6,
                                  int max_classes = 2, bool with_difficult = true);

}  // namespace easyhard::oracle
