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

#include "easyhard/router.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace easyhard {

std::string_view to_string(Route route) { return route == Route::kEasy ? "easy" : "hard"; }

std::string_view to_string(SplitMode mode) {
  return mode == SplitMode::kDifficulty ? "difficulty" : "random";
}

std::size_t Assignment::easy_count() const {
  return static_cast<std::size_t>(std::count_if(
      routes.begin(), routes.end(), [](const auto& r) { return r.second == Route::kEasy; }));
}

Route Assignment::route_of(const ImageId& id) const {
  for (const auto& [image, r] : routes) {
    if (image == id) return r;
  }
  throw Error(fmt::format("image \"{}\" has no route", id));
}

namespace {

void check_fraction(double fraction_easy) {
  if (!(fraction_easy >= 0.0 && fraction_easy <= 1.0)) {
    throw Error(fmt::format("fraction_easy must lie in [0, 1], got {}", fraction_easy));
  }
}

double realized(std::size_t easy, std::size_t n) {
  return n == 0 ? 0.0 : static_cast<double>(easy) / static_cast<double>(n);
}

// Uniform integer in [0, bound) by rejection; stable across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = (0 - bound) % bound;  // 2^64 mod bound
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= limit) return r % bound;
  }
}

}  // namespace

std::size_t easy_count_for(double fraction_easy, std::size_t n) {
  check_fraction(fraction_easy);
  return static_cast<std::size_t>(std::llround(fraction_easy * static_cast<double>(n)));
}

double threshold_for_fraction(std::span<const DifficultyScore> scores, double fraction_easy) {
  if (scores.empty()) throw Error("cannot derive a threshold from an empty score list");
  const std::size_t n = scores.size();
  const std::size_t k = easy_count_for(fraction_easy, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].score != scores[b].score) return scores[a].score < scores[b].score;
    return scores[a].image_id < scores[b].image_id;
  });
  auto sorted = [&](std::size_t i) { return scores[order[i]].score; };

  if (k == 0) return std::nextafter(sorted(0), -std::numeric_limits<double>::infinity());
  const double t = sorted(k - 1);
  if (k == n || sorted(k) != t) return t;

  // Equal scores straddle the cut: [first, last) is the tie block.
  std::size_t first = k - 1;
  while (first > 0 && sorted(first - 1) == t) --first;
  std::size_t last = k;
  while (last < n && sorted(last) == t) ++last;
  const std::size_t below = first;  // easy count if the block goes hard
  const std::size_t above = last;   // easy count if the block goes easy
  if (k - below < above - k) {
    return below == 0 ? std::nextafter(t, -std::numeric_limits<double>::infinity())
                      : sorted(below - 1);
  }
  return t;
}

Assignment difficulty_split(std::span<const ImageId> image_ids,
                            std::span<const DifficultyScore> scores, const SplitPolicy& policy) {
  if (policy.mode != SplitMode::kDifficulty) throw Error("difficulty_split needs a difficulty policy");
  if (policy.fraction_easy.has_value() == policy.threshold.has_value()) {
    throw Error("difficulty split needs exactly one of fraction_easy or threshold");
  }
  std::map<ImageId, double> by_id;
  for (const auto& s : scores) by_id.emplace(s.image_id, s.score);
  std::vector<DifficultyScore> covered;
  covered.reserve(image_ids.size());
  for (const auto& id : image_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(fmt::format("no difficulty score for image \"{}\"", id));
    covered.push_back({id, it->second});
  }

  Assignment out;
  out.policy = policy;
  if (policy.fraction_easy) {
    check_fraction(*policy.fraction_easy);
    out.policy.threshold = covered.empty() ? 0.0 : threshold_for_fraction(covered, *policy.fraction_easy);
  }
  const double t = *out.policy.threshold;
  out.routes.reserve(covered.size());
  for (const auto& s : covered) out.routes.emplace_back(s.image_id, route(s.score, t));
  out.realized_fraction_easy = realized(out.easy_count(), out.routes.size());
  return out;
}

Assignment random_split(std::span<const ImageId> image_ids, double fraction_easy,
                        std::uint64_t seed) {
  const std::size_t n = image_ids.size();
  const std::size_t k = easy_count_for(fraction_easy, n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(perm[i - 1], perm[j]);
  }
  std::vector<bool> easy(n, false);
  for (std::size_t i = 0; i < k; ++i) easy[perm[i]] = true;

  Assignment out;
  out.policy.mode = SplitMode::kRandom;
  out.policy.fraction_easy = fraction_easy;
  out.policy.seed = seed;
  out.routes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.routes.emplace_back(image_ids[i], easy[i] ? Route::kEasy : Route::kHard);
  }
  out.realized_fraction_easy = realized(k, n);
  return out;
}

DispatchedRun dispatch(const Assignment& assignment, const DetectorRun& fast,
                       const DetectorRun& slow) {
  DispatchedRun out;
  for (const auto& [id, r] : assignment.routes) {
    const DetectorRun& run = r == Route::kEasy ? fast : slow;
    if (!run.has_latency(id)) {
      throw Error(fmt::format("detector \"{}\" does not cover image \"{}\"", run.detector_id(), id));
    }
    const auto& dets = run.detections_for(id);
    if (!dets.empty()) out.detections.emplace(id, dets);
    out.source.emplace(id, run.detector_id());
    out.latency_s.emplace(id, run.latency_for(id));
  }
  return out;
}

std::string serialize_assignment(const Assignment& assignment) {
  const SplitPolicy& p = assignment.policy;
  std::string out = fmt::format("# mode={}", to_string(p.mode));
  if (p.fraction_easy) out += fmt::format(" fraction_easy={}", *p.fraction_easy);
  if (p.threshold) out += fmt::format(" threshold={}", *p.threshold);
  if (p.mode == SplitMode::kRandom) out += fmt::format(" seed={}", p.seed);
  out += fmt::format(" realized_fraction_easy={}\n", assignment.realized_fraction_easy);
  for (const auto& [id, r] : assignment.routes) {
    nlohmann::ordered_json j;
    j["image_id"] = id;
    j["route"] = to_string(r);
    out += j.dump();
    out += '\n';
  }
  return out;
}

Assignment parse_assignment(std::string_view text, std::string_view origin) {
  Assignment out;
  std::set<ImageId> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fail = [&](std::string_view what) {
      throw Error(fmt::format("{}:{}: {}", origin, line_no, what));
    };
    if (line.front() == '#') {
      std::istringstream kv(line.substr(1));
      std::string token;
      while (kv >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        try {
          if (key == "mode") {
            out.policy.mode = value == "random" ? SplitMode::kRandom : SplitMode::kDifficulty;
          } else if (key == "fraction_easy") {
            out.policy.fraction_easy = std::stod(value);
          } else if (key == "threshold") {
            out.policy.threshold = std::stod(value);
          } else if (key == "seed") {
            out.policy.seed = std::stoull(value);
          }
        } catch (const std::exception&) {
          fail(fmt::format("bad header value for \"{}\"", key));
        }
      }
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(fmt::format("malformed JSON: {}", e.what()));
    }
    if (!j.is_object() || !j.contains("image_id") || !j["image_id"].is_string() ||
        !j.contains("route") || !j["route"].is_string()) {
      fail("expected {\"image_id\": string, \"route\": \"easy\"|\"hard\"}");
    }
    const auto id = j["image_id"].get<std::string>();
    const auto r = j["route"].get<std::string>();
    if (r != "easy" && r != "hard") fail(fmt::format("unknown route \"{}\"", r));
    if (!seen.insert(id).second) fail(fmt::format("duplicate image_id \"{}\"", id));
    out.routes.emplace_back(id, r == "easy" ? Route::kEasy : Route::kHard);
  }
  out.realized_fraction_easy = realized(out.easy_count(), out.routes.size());
  return out;
}

}  // namespace easyhard
