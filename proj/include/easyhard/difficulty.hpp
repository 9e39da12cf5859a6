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

// Image difficulty predictor: per-vector L2 normalization followed by a
// linear nu-support vector regressor.
//
// The regressor solves
//
//   min  1/2 |w|^2 + C (nu * eps + 1/n sum_i (xi_i + xi*_i))
//   s.t. (w.x_i + b) - y_i <= eps + xi_i,  y_i - (w.x_i + b) <= eps + xi*_i,
//        xi, xi* >= 0,  eps >= 0
//
// through its dual in the variables a, a* (one pair per sample):
//
//   min  1/2 (a - a*)' K (a - a*) - y' (a - a*)
//   s.t. sum(a - a*) = 0,  sum(a + a*) = C nu,  0 <= a, a* <= C / n
//
// with K the linear Gram matrix. Primal weights are w = sum (a_i - a*_i) x_i.

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "easyhard/core_data.hpp"

namespace easyhard {

struct SvrConfig {
  double nu = 0.5;
  double c = 1.0;
  double tolerance = 1e-6;  // maximal KKT violation at convergence
  std::size_t max_iterations = 100000;

  // Throws Error unless nu in (0, 1], c > 0, tolerance > 0, max_iterations > 0.
  void validate() const;
};

struct DifficultyModel {
  std::vector<double> weights;
  double bias = 0.0;
  SvrConfig config;

  std::size_t dim() const { return weights.size(); }
};

// Everything the solver knows at termination. Used by tests and diagnostics.
struct SvrSolution {
  DifficultyModel model;
  std::vector<double> alpha;       // a
  std::vector<double> alpha_star;  // a*
  std::vector<double> coef;        // a - a*
  double epsilon = 0.0;            // tube half-width recovered from the KKT conditions
  double dual_objective = 0.0;     // value of the minimized dual
  double kkt_violation = 0.0;
  std::size_t iterations = 0;
};

enum class InputScaling { kNormalize, kPreNormalized };

// Throws Error on a zero or non-finite vector.
std::vector<double> l2_normalize(std::span<const double> v);

// Trains on the given rows as-is; callers normalize beforehand.
SvrSolution solve_nu_svr(std::span<const std::vector<double>> features,
                         std::span<const double> targets, const SvrConfig& config = {});

DifficultyModel train_nu_svr(std::span<const std::vector<double>> features,
                             std::span<const double> targets, const SvrConfig& config = {});

double predict_difficulty(const DifficultyModel& model, std::span<const double> feature,
                          InputScaling scaling = InputScaling::kNormalize);

std::vector<DifficultyScore> predict_difficulty(const DifficultyModel& model,
                                                std::span<const FeatureRecord> features);

// Kendall's tau-b between predictions on `features` and `ground_truth`.
// Throws Error if a feature record has no ground-truth score, or tau is undefined.
double evaluate_predictor(const DifficultyModel& model, std::span<const FeatureRecord> features,
                          std::span<const DifficultyScore> ground_truth);

// Normalizes every record and pairs it with its target by image_id.
struct TrainingSet {
  std::vector<std::vector<double>> features;
  std::vector<double> targets;
};
TrainingSet make_training_set(std::span<const FeatureRecord> features,
                              std::span<const DifficultyScore> targets);

std::string model_to_json(const DifficultyModel& model);
DifficultyModel model_from_json(std::string_view text);
void save_model(const DifficultyModel& model, const std::filesystem::path& path);
DifficultyModel load_model(const std::filesystem::path& path);

}  // namespace easyhard
