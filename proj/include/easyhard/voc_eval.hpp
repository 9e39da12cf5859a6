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

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "easyhard/core_data.hpp"

namespace easyhard {

enum class ApMode {
  kContinuous,  // area under the right-envelope of the PR curve
  kElevenPoint  // mean interpolated precision at recall 0, 0.1, ..., 1
};

// How ground truths flagged `difficult` take part in matching.
enum class DifficultPolicy {
  kIgnore,        // not positives; detections matching them are dropped
  kCountNormally  // treated like any other ground truth
};

std::string_view to_string(ApMode mode);
ApMode parse_ap_mode(std::string_view text);
std::string_view to_string(DifficultPolicy policy);
DifficultPolicy parse_difficult_policy(std::string_view text);

struct EvalConfig {
  double iou_threshold = 0.5;
  ApMode ap_mode = ApMode::kContinuous;
  DifficultPolicy difficult = DifficultPolicy::kIgnore;
  // Detections scoring below this are discarded before matching.
  std::optional<double> score_threshold;
};

enum class Verdict { kTruePositive, kFalsePositive, kIgnored };

struct MatchOutcome {
  std::size_t detection_index = 0;  // index into the input detections
  Verdict verdict = Verdict::kFalsePositive;
  std::optional<std::size_t> ground_truth_index;  // set for true positives only
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;

  bool operator==(const PrPoint&) const = default;
};

struct PRCurve {
  std::vector<PrPoint> points;  // one per counted detection, in rank order
  std::size_t total_positives = 0;
};

struct EvalReport {
  std::map<std::string, double> per_class;  // ordered by class label
  double map = 0.0;
  ApMode ap_mode = ApMode::kContinuous;
  double iou_threshold = 0.5;
};

// Intersection over union of two valid boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

// Greedy matching of one image's detections of one class.
//
// Detections are visited by decreasing score (ties: input order). Each one
// takes the unconsumed ground truth with the highest IoU, if that IoU is
// strictly above the threshold; ground truths are consumed at most once.
// Under DifficultPolicy::kIgnore a match onto a difficult ground truth
// yields kIgnored and consumes nothing. Outcomes come back in visit order.
std::vector<MatchOutcome> match_detections(std::span<const Detection> detections,
                                           std::span<const GroundTruthObject> ground_truths,
                                           double iou_threshold = 0.5,
                                           DifficultPolicy policy = DifficultPolicy::kIgnore);

// Cumulative PR curve over already-ranked verdicts; kIgnored entries are skipped.
PRCurve pr_curve_from_verdicts(std::span<const Verdict> ranked, std::size_t total_positives);

// PR curve for one class across the dataset. Detections are ranked by
// (score desc, image_id asc, input order asc).
PRCurve pr_curve(std::span<const Detection> detections, const Dataset& dataset,
                 std::string_view class_label, const EvalConfig& config = {});

double average_precision(const PRCurve& curve, ApMode mode = ApMode::kContinuous);

// mAP over every class with at least one counted ground-truth positive.
// Throws Error on an empty dataset, on detections for unknown images, and
// when no class has a positive.
EvalReport mean_average_precision(const DetectionsByImage& detections, const Dataset& dataset,
                                  const EvalConfig& config = {});

// {"map", "per_class", "ap_mode", "iou_threshold"} on one line, no newline.
std::string to_json(const EvalReport& report);

// Kendall's tau-b. Returns std::nullopt when either side is constant.
// Throws Error when lengths differ or fewer than two pairs are given.
std::optional<double> kendall_tau(std::span<const double> x, std::span<const double> y);

}  // namespace easyhard
