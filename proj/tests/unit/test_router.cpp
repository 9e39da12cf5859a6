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


#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "easyhard/router.hpp"

using namespace easyhard;

namespace {

std::vector<DifficultyScore> scores_of(const std::vector<double>& values) {
  std::vector<DifficultyScore> s;
  for (std::size_t i = 0; i < values.size(); ++i) s.push_back({"img" + std::to_string(i), values[i]});
  return s;
}

std::vector<ImageId> ids_of(const std::vector<DifficultyScore>& s) {
  std::vector<ImageId> ids;
  for (const auto& x : s) ids.push_back(x.image_id);
  return ids;
}

std::size_t easy_under(const std::vector<DifficultyScore>& s, double t) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [&](const auto& x) { return route(x.score, t) == Route::kEasy; }));
}

SplitPolicy by_fraction(double f) { return {SplitMode::kDifficulty, f, std::nullopt, 0}; }

}  // namespace

TEST_CASE("easy_count_for rounds halves away from zero") {
  CHECK(easy_count_for(0.25, 100) == 25);
  CHECK(easy_count_for(0.5, 3) == 2);
  CHECK(easy_count_for(0.5, 5) == 3);
  CHECK(easy_count_for(0.0, 7) == 0);
  CHECK(easy_count_for(1.0, 7) == 7);
  CHECK(easy_count_for(0.3, 0) == 0);
  CHECK_THROWS_AS(easy_count_for(1.5, 4), Error);
  CHECK_THROWS_AS(easy_count_for(-0.1, 4), Error);
  CHECK_THROWS_AS(easy_count_for(NAN, 4), Error);
}

TEST_CASE("threshold_for_fraction examples") {
  const auto s = scores_of({0.3, 0.1, 0.4, 0.2});
  CHECK(threshold_for_fraction(s, 0.5) == 0.2);
  CHECK(easy_under(s, threshold_for_fraction(s, 0.5)) == 2);
  const double t0 = threshold_for_fraction(s, 0.0);
  CHECK(t0 < 0.1);
  CHECK(easy_under(s, t0) == 0);
  CHECK(threshold_for_fraction(s, 1.0) == 0.4);
  CHECK(easy_under(s, threshold_for_fraction(s, 1.0)) == 4);
  CHECK_THROWS_AS(threshold_for_fraction({}, 0.5), Error);
}

TEST_CASE("tie blocks straddling the cut go to the closest side") {
  const auto s = scores_of({0.1, 0.2, 0.2, 0.2, 0.5});
  // k = 2: inclusive side gives 4 easy, exclusive side 1.
  CHECK(threshold_for_fraction(s, 0.4) == 0.1);
  // k = 3: inclusive 4 is closer than exclusive 1.
  CHECK(threshold_for_fraction(s, 0.6) == 0.2);
  // k = 2 of 4 with a draw (3 vs 1): inclusive wins.
  const auto d = scores_of({0.1, 0.2, 0.2, 0.5});
  CHECK(threshold_for_fraction(d, 0.5) == 0.2);
  // A leading tie block with k = 1: exclusive side means no easy images.
  const auto lead = scores_of({0.3, 0.3, 0.3, 0.9});
  const double t = threshold_for_fraction(lead, 0.25);
  CHECK(easy_under(lead, t) == 0);

  const auto a = difficulty_split(ids_of(s), s, by_fraction(0.4));
  CHECK(a.easy_count() == 1);
  CHECK(a.realized_fraction_easy == 0.2);
}

TEST_CASE("route is inclusive at the threshold") {
  CHECK(route(0.3, 0.5) == Route::kEasy);
  CHECK(route(0.5, 0.5) == Route::kEasy);
  CHECK(route(0.7, 0.5) == Route::kHard);
}

TEST_CASE("difficulty_split by fraction or explicit threshold") {
  const auto s = scores_of({0.9, 0.1, 0.5, 0.3});
  const auto ids = ids_of(s);
  const Assignment a = difficulty_split(ids, s, by_fraction(0.5));
  CHECK(a.route_of("img1") == Route::kEasy);
  CHECK(a.route_of("img3") == Route::kEasy);
  CHECK(a.route_of("img0") == Route::kHard);
  CHECK(a.realized_fraction_easy == 0.5);
  CHECK(a.routes[0].first == "img0");
  CHECK(*a.policy.fraction_easy == 0.5);
  CHECK(*a.policy.threshold == 0.3);

  const Assignment b = difficulty_split(ids, s, {SplitMode::kDifficulty, std::nullopt, 0.5, 0});
  CHECK(b.easy_count() == 3);
  CHECK(b.realized_fraction_easy == 0.75);

  CHECK_THROWS_AS(difficulty_split(ids, s, {SplitMode::kDifficulty, 0.5, 0.5, 0}), Error);
  CHECK_THROWS_AS(difficulty_split(ids, s, {SplitMode::kDifficulty, std::nullopt, std::nullopt, 0}), Error);
  auto more = ids;
  more.push_back("unscored");
  CHECK_THROWS_WITH_AS(difficulty_split(more, s, by_fraction(0.5)), doctest::Contains("\"unscored\""), Error);
  CHECK_THROWS_AS(a.route_of("nope"), Error);
}

TEST_CASE("random_split examples") {
  std::vector<ImageId> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("i" + std::to_string(i));
  const Assignment none = random_split(ids, 0.0, 1);
  CHECK(none.easy_count() == 0);
  const Assignment a = random_split(ids, 0.25, 42);
  CHECK(a.easy_count() == 25);
  CHECK(a.realized_fraction_easy == 0.25);
  const Assignment again = random_split(ids, 0.25, 42);
  CHECK(a.routes == again.routes);
  CHECK(random_split(ids, 0.25, 43).routes != a.routes);
  CHECK(a.policy.mode == SplitMode::kRandom);
  CHECK(a.policy.seed == 42);
  CHECK_THROWS_AS(random_split(ids, 2.0, 1), Error);
}

TEST_CASE("dispatch takes each image wholesale from one run") {
  const DetectionsByImage fast_d{{"a", {{"a", "car", 0.4, {0, 0, 1, 1}}}}, {"b", {{"b", "dog", 0.3, {0, 0, 2, 2}}}}};
  const DetectionsByImage slow_d{{"a", {{"a", "car", 0.9, {0, 0, 1, 1}}, {"a", "cat", 0.8, {1, 1, 3, 3}}}}};
  const DetectorRun fast("fast", fast_d, 0.07), slow("slow", slow_d, 7.74);
  const std::vector<ImageId> ids{"a", "b"};

  const DispatchedRun all_easy = dispatch(random_split(ids, 1.0, 0), fast, slow);
  CHECK(all_easy.detections == fast_d);
  const DispatchedRun all_hard = dispatch(random_split(ids, 0.0, 0), fast, slow);
  CHECK(all_hard.detections == slow_d);
  CHECK(all_hard.source.at("b") == "slow");
  CHECK(all_hard.latency_s.at("b") == 7.74);

  Assignment mixed;
  mixed.routes = {{"a", Route::kEasy}, {"b", Route::kHard}};
  const DispatchedRun m = dispatch(mixed, fast, slow);
  CHECK(m.detections.at("a") == fast_d.at("a"));
  CHECK_FALSE(m.detections.contains("b"));
  CHECK(m.source.at("a") == "fast");
  CHECK(m.source.at("b") == "slow");

  const DetectorRun partial("partial", {}, std::map<ImageId, double>{{"a", 1.0}});
  CHECK_THROWS_WITH_AS(dispatch(mixed, fast, partial), doctest::Contains("\"b\""), Error);
}

TEST_CASE("property: rank invariance, partition and monotonicity") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    std::uniform_int_distribution<int> v(0, trial % 2 ? 5 : 10000);
    std::vector<double> raw(static_cast<std::size_t>(n));
    for (double& x : raw) x = v(rng) / 100.0;
    const auto s = scores_of(raw);
    std::vector<double> transformed(raw.size());
    std::transform(raw.begin(), raw.end(), transformed.begin(), [](double x) { return std::exp(3 * x) - 7.0; });
    const auto st = scores_of(transformed);
    const auto ids = ids_of(s);

    std::set<ImageId> previous_easy;
    for (const double f : {0.0, 0.1, 0.25, 0.5, 0.6, 0.75, 0.9, 1.0}) {
      const Assignment a = difficulty_split(ids, s, by_fraction(f));
      const Assignment b = difficulty_split(ids, st, by_fraction(f));
      CHECK(a.routes == b.routes);

      REQUIRE(a.routes.size() == ids.size());
      std::set<ImageId> seen, easy;
      for (const auto& [id, r] : a.routes) {
        CHECK(seen.insert(id).second);
        if (r == Route::kEasy) easy.insert(id);
      }
      CHECK(seen.size() == ids.size());
      CHECK(std::includes(easy.begin(), easy.end(), previous_easy.begin(), previous_easy.end()));
      previous_easy = easy;

      const Assignment r = random_split(ids, f, static_cast<std::uint64_t>(trial));
      CHECK(r.easy_count() == easy_count_for(f, ids.size()));
    }
  }
}

TEST_CASE("property: dispatched detections equal exactly one input run per image") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    DetectionsByImage f, s;
    std::vector<ImageId> ids;
    for (int i = 0; i < 12; ++i) {
      const ImageId id = "i" + std::to_string(i);
      ids.push_back(id);
      const int nf = std::uniform_int_distribution<int>(0, 3)(rng);
      const int ns = std::uniform_int_distribution<int>(0, 3)(rng);
      for (int k = 0; k < nf; ++k) f[id].push_back({id, "f", 0.1 * k, {0, 0, 1.0 + k, 1}});
      for (int k = 0; k < ns; ++k) s[id].push_back({id, "s", 0.1 * k, {0, 0, 1.0 + k, 1}});
    }
    const DetectorRun fast("fast", f, 0.1), slow("slow", s, 1.0);
    const Assignment a = random_split(ids, 0.5, static_cast<std::uint64_t>(trial));
    const DispatchedRun d = dispatch(a, fast, slow);
    for (const auto& [id, r] : a.routes) {
      const auto& want = (r == Route::kEasy ? fast : slow).detections_for(id);
      const auto it = d.detections.find(id);
      const std::vector<Detection> got = it == d.detections.end() ? std::vector<Detection>{} : it->second;
      CHECK(got == want);
      CHECK(d.source.at(id) == (r == Route::kEasy ? "fast" : "slow"));
    }
  }
}

TEST_CASE("assignment file round-trip") {
  const auto s = scores_of({0.9, 0.1, 0.5});
  const Assignment a = difficulty_split(ids_of(s), s, by_fraction(0.5));
  const std::string text = serialize_assignment(a);
  CHECK(text.rfind("# mode=difficulty fraction_easy=0.5 threshold=0.5", 0) == 0);
  CHECK(text.find("{\"image_id\":\"img0\",\"route\":\"hard\"}\n") != std::string::npos);
  const Assignment back = parse_assignment(text);
  CHECK(back.routes == a.routes);
  CHECK(back.realized_fraction_easy == a.realized_fraction_easy);
  CHECK(serialize_assignment(back) == text);

  std::vector<ImageId> ids{"x", "y", "z"};
  const Assignment r = random_split(ids, 0.5, 9);
  CHECK(serialize_assignment(parse_assignment(serialize_assignment(r))) == serialize_assignment(r));
  CHECK_THROWS_AS(parse_assignment("{\"image_id\":\"x\",\"route\":\"medium\"}\n"), Error);
}
