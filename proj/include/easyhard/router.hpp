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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "easyhard/core_data.hpp"

namespace easyhard {

enum class Route { kEasy, kHard };
enum class SplitMode { kDifficulty, kRandom };

std::string_view to_string(Route route);
std::string_view to_string(SplitMode mode);

struct SplitPolicy {
  SplitMode mode = SplitMode::kDifficulty;
  // Difficulty mode: exactly one of fraction_easy / threshold decides the
  // split. Random mode: fraction_easy is required.
  std::optional<double> fraction_easy;
  std::optional<double> threshold;
  std::uint64_t seed = 0;
};

struct Assignment {
  std::vector<std::pair<ImageId, Route>> routes;  // dataset order
  SplitPolicy policy;
  double realized_fraction_easy = 0.0;

  std::size_t easy_count() const;
  Route route_of(const ImageId& id) const;  // throws Error for unknown ids
};

// Number of easy images for a requested fraction: round(fraction * n), with
// halves rounded away from zero.
std::size_t easy_count_for(double fraction_easy, std::size_t n);

// Order-statistic threshold for the requested easy fraction.
//
// With k = easy_count_for(fraction, n) and scores sorted ascending (ties by
// image_id): k = 0 yields a value just below the minimum, otherwise the k-th
// smallest score. When equal scores straddle the cut, the threshold moves to
// whichever side of the tie block gives an easy count closest to k (the
// inclusive side on a draw).
double threshold_for_fraction(std::span<const DifficultyScore> scores, double fraction_easy);

// Easy iff score <= threshold.
inline Route route(double score, double threshold) {
  return score <= threshold ? Route::kEasy : Route::kHard;
}

// Difficulty split of `image_ids` according to `policy` (mode kDifficulty).
// Throws Error when an image lacks a score or the policy is ambiguous.
Assignment difficulty_split(std::span<const ImageId> image_ids,
                            std::span<const DifficultyScore> scores, const SplitPolicy& policy);

// Exactly easy_count_for(fraction, n) images marked easy, chosen by a seeded
// Fisher-Yates shuffle over mt19937_64.
Assignment random_split(std::span<const ImageId> image_ids, double fraction_easy,
                        std::uint64_t seed);

struct DispatchedRun {
  DetectionsByImage detections;
  std::map<ImageId, std::string> source;  // detector_id that produced each image
  std::map<ImageId, double> latency_s;
};

// Per image, all detections come from the fast run if easy, the slow run if hard.
DispatchedRun dispatch(const Assignment& assignment, const DetectorRun& fast,
                       const DetectorRun& slow);

// JSONL with a leading "#" comment echoing the policy.
std::string serialize_assignment(const Assignment& assignment);
Assignment parse_assignment(std::string_view text, std::string_view origin = "<memory>");

}  // namespace easyhard
