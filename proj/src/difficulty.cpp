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

#include "easyhard/difficulty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "easyhard/voc_eval.hpp"

namespace easyhard {

void SvrConfig::validate() const {
  if (!(nu > 0.0 && nu <= 1.0)) throw Error(fmt::format("nu must lie in (0, 1], got {}", nu));
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(fmt::format("C must be positive, got {}", c));
  if (!(tolerance > 0.0)) throw Error(fmt::format("tolerance must be positive, got {}", tolerance));
  if (max_iterations == 0) throw Error("max_iterations must be positive");
}

std::vector<double> l2_normalize(std::span<const double> v) {
  double sq = 0.0;
  for (const double x : v) {
    if (!std::isfinite(x)) throw Error("cannot normalize a non-finite vector");
    sq += x * x;
  }
  if (sq == 0.0) throw Error("cannot normalize a zero vector");
  // Scale first so huge or tiny entries do not overflow the squared norm.
  const double scale = *std::max_element(v.begin(), v.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  });
  std::vector<double> out(v.begin(), v.end());
  double norm_sq = 0.0;
  for (double& x : out) {
    x /= std::abs(scale);
    norm_sq += x * x;
  }
  const double norm = std::sqrt(norm_sq);
  for (double& x : out) x /= norm;
  return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Linear kernel rows, precomputed for small problems and recomputed otherwise.
class GramMatrix {
 public:
  static constexpr std::size_t kMaxCached = 3000;

  explicit GramMatrix(std::span<const std::vector<double>> x) : x_(x), n_(x.size()) {
    diag_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = dot(x_[i], x_[i]);
    if (n_ <= kMaxCached) {
      full_.resize(n_ * n_);
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i; j < n_; ++j) {
          full_[i * n_ + j] = full_[j * n_ + i] = dot(x_[i], x_[j]);
        }
      }
    }
  }

  double diag(std::size_t i) const { return diag_[i]; }

  // Row i of K; the span stays valid until the next call with a different i
  // when rows are not cached.
  std::span<const double> row(std::size_t i) {
    if (!full_.empty()) return {full_.data() + i * n_, n_};
    if (scratch_owner_[0] == i) return scratch_[0];
    if (scratch_owner_[1] == i) return scratch_[1];
    const std::size_t slot = next_slot_;
    next_slot_ ^= 1U;
    scratch_[slot].resize(n_);
    for (std::size_t j = 0; j < n_; ++j) scratch_[slot][j] = dot(x_[i], x_[j]);
    scratch_owner_[slot] = i;
    return scratch_[slot];
  }

 private:
  std::span<const std::vector<double>> x_;
  std::size_t n_;
  std::vector<double> diag_;
  std::vector<double> full_;
  std::vector<double> scratch_[2];
  std::size_t scratch_owner_[2] = {std::numeric_limits<std::size_t>::max(),
                                   std::numeric_limits<std::size_t>::max()};
  unsigned next_slot_ = 0;
};

constexpr double kMinCurvature = 1e-12;

void check_inputs(std::span<const std::vector<double>> features, std::span<const double> targets) {
  if (features.size() != targets.size()) {
    throw Error(fmt::format("{} feature rows but {} targets", features.size(), targets.size()));
  }
  if (features.size() < 2) throw Error("nu-SVR needs at least two samples");
  const std::size_t d = features.front().size();
  if (d == 0) throw Error("feature vectors must be non-empty");
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != d) {
      throw Error(fmt::format("feature dimension mismatch at row {}: expected {}, got {}", i, d,
                              features[i].size()));
    }
    for (const double v : features[i]) {
      if (!std::isfinite(v)) throw Error(fmt::format("non-finite feature at row {}", i));
    }
    if (!std::isfinite(targets[i])) throw Error(fmt::format("non-finite target at row {}", i));
  }
}

}  // namespace

// SMO on the 2n dual variables beta = [a; a*]. Variables of the same sign
// share one linear equality (each half sums to C nu / 2), so every step moves
// mass between two variables of one half. The pair is chosen by maximal
// violation for the first index and second-order gain for the second.
SvrSolution solve_nu_svr(std::span<const std::vector<double>> features,
                         std::span<const double> targets, const SvrConfig& config) {
  config.validate();
  check_inputs(features, targets);

  const std::size_t n = features.size();
  const std::size_t d = features.front().size();
  const std::size_t m = 2 * n;
  const double ub = config.c / static_cast<double>(n);
  GramMatrix gram(features);

  auto sample = [n](std::size_t t) { return t < n ? t : t - n; };
  auto sign = [n](std::size_t t) { return t < n ? 1.0 : -1.0; };

  std::vector<double> beta(m, 0.0);
  for (std::size_t half = 0; half < 2; ++half) {
    double remaining = config.c * config.nu / 2.0;
    for (std::size_t k = 0; k < n && remaining > 0.0; ++k) {
      beta[half * n + k] = std::min(remaining, ub);
      remaining -= beta[half * n + k];
    }
  }
  // Both halves start identical, so a - a* = 0 and the gradient is the
  // linear term alone.
  std::vector<double> grad(m);
  for (std::size_t k = 0; k < n; ++k) {
    grad[k] = -targets[k];
    grad[n + k] = targets[k];
  }

  auto half_violation = [&](std::size_t half, std::size_t& i_out) {
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();
    i_out = m;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t t = half * n + k;
      if (beta[t] < ub && grad[t] < g_min) {
        g_min = grad[t];
        i_out = t;
      }
      if (beta[t] > 0.0 && grad[t] > g_max) g_max = grad[t];
    }
    return g_max - g_min;
  };

  SvrSolution sol;
  std::size_t iter = 0;
  double violation = 0.0;
  for (;; ++iter) {
    std::size_t i_half[2];
    const double v0 = half_violation(0, i_half[0]);
    const double v1 = half_violation(1, i_half[1]);
    violation = std::max(v0, v1);
    if (violation <= config.tolerance) break;
    if (iter >= config.max_iterations) {
      throw Error(fmt::format("nu-SVR did not converge in {} iterations (KKT violation {:.3e})",
                              config.max_iterations, violation));
    }

    // Second-order choice of j across both halves.
    std::size_t best_i = m, best_j = m;
    double best_gain = -1.0;
    for (std::size_t half = 0; half < 2; ++half) {
      const std::size_t i = i_half[half];
      if (i == m) continue;
      const std::size_t si = sample(i);
      const auto row_i = gram.row(si);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t t = half * n + k;
        if (!(beta[t] > 0.0) || !(grad[t] > grad[i])) continue;
        const double b = grad[t] - grad[i];
        const double a = std::max(gram.diag(si) + gram.diag(k) - 2.0 * row_i[k], kMinCurvature);
        const double gain = b * b / a;
        if (gain > best_gain) {
          best_gain = gain;
          best_i = i;
          best_j = t;
        }
      }
    }
    if (best_j == m) break;  // no admissible pair; numerically optimal

    const std::size_t si = sample(best_i), sj = sample(best_j);
    const auto row_i_view = gram.row(si);
    const std::vector<double> row_i(row_i_view.begin(), row_i_view.end());
    const auto row_j = gram.row(sj);
    const double a = std::max(gram.diag(si) + gram.diag(sj) - 2.0 * row_i[sj], kMinCurvature);
    double delta = (grad[best_j] - grad[best_i]) / a;
    delta = std::min({delta, ub - beta[best_i], beta[best_j]});
    if (!(delta > 0.0)) break;

    beta[best_i] += delta;
    beta[best_j] -= delta;
    if (ub - beta[best_i] < ub * 1e-15) beta[best_i] = ub;
    if (beta[best_j] < ub * 1e-15) beta[best_j] = 0.0;

    // Both variables carry the same sign s, so Q_ti - Q_tj = s_t s (K_i - K_j).
    const double s = sign(best_i);
    for (std::size_t k = 0; k < n; ++k) {
      const double change = delta * s * (row_i[k] - row_j[k]);
      grad[k] += change;
      grad[n + k] -= change;
    }
  }

  // Per-half multipliers: mean gradient over free variables, else the
  // midpoint of the bounds implied by variables at 0 and at C/n.
  double r[2];
  for (std::size_t half = 0; half < 2; ++half) {
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t t = half * n + k;
      if (beta[t] >= ub) {
        lower = std::max(lower, grad[t]);
      } else if (beta[t] <= 0.0) {
        upper = std::min(upper, grad[t]);
      } else {
        free_sum += grad[t];
        ++free_count;
      }
    }
    if (free_count > 0) {
      r[half] = free_sum / static_cast<double>(free_count);
    } else if (std::isfinite(upper) && std::isfinite(lower)) {
      r[half] = (upper + lower) / 2.0;
    } else {
      r[half] = std::isfinite(upper) ? upper : lower;
    }
  }

  sol.alpha.assign(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(n));
  sol.alpha_star.assign(beta.begin() + static_cast<std::ptrdiff_t>(n), beta.end());
  sol.coef.resize(n);
  for (std::size_t k = 0; k < n; ++k) sol.coef[k] = sol.alpha[k] - sol.alpha_star[k];

  sol.model.config = config;
  sol.model.weights.assign(d, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (sol.coef[k] == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) sol.model.weights[j] += sol.coef[k] * features[k][j];
  }
  sol.model.bias = (r[1] - r[0]) / 2.0;
  sol.epsilon = -(r[0] + r[1]) / 2.0;

  double quad = 0.0, lin = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (sol.coef[k] == 0.0) continue;
    quad += sol.coef[k] * dot(gram.row(k), sol.coef);
    lin += targets[k] * sol.coef[k];
  }
  sol.dual_objective = 0.5 * quad - lin;
  sol.kkt_violation = violation;
  sol.iterations = iter;
  return sol;
}

DifficultyModel train_nu_svr(std::span<const std::vector<double>> features,
                             std::span<const double> targets, const SvrConfig& config) {
  return solve_nu_svr(features, targets, config).model;
}

double predict_difficulty(const DifficultyModel& model, std::span<const double> feature,
                          InputScaling scaling) {
  if (feature.size() != model.dim()) {
    throw Error(fmt::format("feature dimension {} does not match model dimension {}",
                            feature.size(), model.dim()));
  }
  if (scaling == InputScaling::kPreNormalized) return dot(model.weights, feature) + model.bias;
  return dot(model.weights, l2_normalize(feature)) + model.bias;
}

std::vector<DifficultyScore> predict_difficulty(const DifficultyModel& model,
                                                std::span<const FeatureRecord> features) {
  std::vector<DifficultyScore> out;
  out.reserve(features.size());
  for (const auto& f : features) {
    out.push_back({f.image_id, predict_difficulty(model, f.vector)});
  }
  return out;
}

double evaluate_predictor(const DifficultyModel& model, std::span<const FeatureRecord> features,
                          std::span<const DifficultyScore> ground_truth) {
  std::map<ImageId, double> truth;
  for (const auto& g : ground_truth) truth.emplace(g.image_id, g.score);
  std::vector<double> predicted, expected;
  predicted.reserve(features.size());
  expected.reserve(features.size());
  for (const auto& f : features) {
    const auto it = truth.find(f.image_id);
    if (it == truth.end()) {
      throw Error(fmt::format("no ground-truth difficulty for image \"{}\"", f.image_id));
    }
    predicted.push_back(predict_difficulty(model, f.vector));
    expected.push_back(it->second);
  }
  if (predicted.size() < 2) throw Error("need at least two test images to compute Kendall's tau");
  const auto tau = kendall_tau(predicted, expected);
  if (!tau) throw Error("Kendall's tau is undefined: predictions or targets are constant");
  return *tau;
}

TrainingSet make_training_set(std::span<const FeatureRecord> features,
                              std::span<const DifficultyScore> targets) {
  std::map<ImageId, double> by_id;
  for (const auto& t : targets) by_id.emplace(t.image_id, t.score);
  TrainingSet set;
  set.features.reserve(features.size());
  set.targets.reserve(features.size());
  for (const auto& f : features) {
    const auto it = by_id.find(f.image_id);
    if (it == by_id.end()) {
      throw Error(fmt::format("no difficulty target for image \"{}\"", f.image_id));
    }
    if (!set.features.empty() && set.features.front().size() != f.vector.size()) {
      throw Error(fmt::format("feature dimension mismatch for image \"{}\"", f.image_id));
    }
    set.features.push_back(l2_normalize(f.vector));
    set.targets.push_back(it->second);
  }
  return set;
}

// ---------------------------------------------------------------------------
// Model files

std::string model_to_json(const DifficultyModel& model) {
  nlohmann::ordered_json j;
  j["w"] = model.weights;
  j["b"] = model.bias;
  j["nu"] = model.config.nu;
  j["c"] = model.config.c;
  j["dim"] = model.dim();
  j["normalized_inputs"] = true;
  return j.dump();
}

DifficultyModel model_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(fmt::format("malformed model file: {}", e.what()));
  }
  DifficultyModel model;
  try {
    model.weights = j.at("w").get<std::vector<double>>();
    model.bias = j.at("b").get<double>();
    model.config.nu = j.at("nu").get<double>();
    model.config.c = j.at("c").get<double>();
    const auto dim = j.at("dim").get<std::size_t>();
    if (dim != model.weights.size()) {
      throw Error(fmt::format("model dim {} but {} weights", dim, model.weights.size()));
    }
    if (!j.at("normalized_inputs").get<bool>()) {
      throw Error("only models over L2-normalized inputs are supported");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("invalid model file: {}", e.what()));
  }
  if (model.weights.empty()) throw Error("model has no weights");
  for (const double w : model.weights) {
    if (!std::isfinite(w)) throw Error("model has a non-finite weight");
  }
  if (!std::isfinite(model.bias)) throw Error("model has a non-finite bias");
  return model;
}

void save_model(const DifficultyModel& model, const std::filesystem::path& path) {
  write_text_file(path, model_to_json(model) + "\n");
}

DifficultyModel load_model(const std::filesystem::path& path) {
  return model_from_json(read_text_file(path));
}

}  // namespace easyhard
