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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "easyhard/core_data.hpp"
#include "easyhard/router.hpp"
#include "easyhard/voc_eval.hpp"

namespace easyhard {

// One column of an accuracy/latency table. Times are per-image means.
struct TradeoffPoint {
  double fraction_easy = 0.0;
  SplitMode strategy = SplitMode::kDifficulty;
  double map = 0.0;
  std::optional<double> map_std;  // random strategy only, over repeats
  double detection_time_s = 0.0;
  double predictor_time_s = 0.0;
  double total_time_s = 0.0;

  bool operator==(const TradeoffPoint&) const = default;
};

struct HarnessConfig {
  std::vector<double> fractions{1.0, 0.75, 0.5, 0.25, 0.0};
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  double predictor_cost_s = 0.05;
  // Charge the predictor at the 0% and 100% endpoints as well.
  bool charge_predictor_always = false;
  EvalConfig eval;

  void validate() const;
};

struct SplitEvaluation {
  TradeoffPoint point;
  EvalReport report;
  std::map<ImageId, std::string> source;  // detector used per image
};

// Per-image detection time of one run over the whole dataset.
double mean_latency(const DetectorRun& run, const Dataset& dataset);

// mAP of the dispatched detections plus latency accounting for one assignment.
// Detection time weighs each detector's mean latency over its own images by
// the share of images it received. The predictor is charged only for difficulty splits strictly between the
// endpoints unless `charge_predictor_always` is set.
SplitEvaluation evaluate_split(const Dataset& dataset, const DetectorRun& fast,
                               const DetectorRun& slow, const Assignment& assignment,
                               double predictor_cost_s, const EvalConfig& eval = {},
                               bool charge_predictor_always = false);

// Points ordered by fraction descending, difficulty before random. With no
// scores only random points are produced. Random points average `repeats`
// assignments seeded seed, seed+1, ...
std::vector<TradeoffPoint> sweep(const Dataset& dataset, const DetectorRun& fast,
                                 const DetectorRun& slow,
                                 std::span<const DifficultyScore> difficulty_scores,
                                 const HarnessConfig& config);

enum class ReportFormat { kCsv, kMarkdown };
ReportFormat parse_report_format(std::string_view text);

struct ReportLabels {
  std::string fast = "fast";
  std::string slow = "slow";
};

// CSV: one row per point. Markdown: the transposed table with one column per
// fraction. mAP uses 4 decimals, seconds 2; predictor-time cells at the 0%
// and 100% columns render "-" when nothing was charged there.
std::string render_report(std::span<const TradeoffPoint> points, ReportFormat format,
                          const ReportLabels& labels = {});

// Inverse of the CSV rendering (values come back at printed precision).
std::vector<TradeoffPoint> parse_points_csv(std::string_view text,
                                            std::string_view origin = "<memory>");

struct StrategyDelta {
  double fraction_easy = 0.0;
  double delta = 0.0;  // difficulty mAP - random mAP
};

// Throws Error when a fraction has only one of the two strategies.
std::vector<StrategyDelta> compare_strategies(std::span<const TradeoffPoint> points);

// "100%-0%" style column label for an easy fraction.
std::string split_label(double fraction_easy);

}  // namespace easyhard
