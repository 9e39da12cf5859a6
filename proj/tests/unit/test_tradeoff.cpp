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


#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "doctest.h"
#include "easyhard/tradeoff.hpp"
#include "synthetic.hpp"

using namespace easyhard;

namespace {

struct Fixture {
  Dataset dataset;
  DetectorRun fast, slow;
  std::vector<DifficultyScore> scores;
};

Fixture make_fixture(int images = 40) {
  synthetic::ScenarioConfig cfg;
  cfg.images = images;
  cfg.train_images = 2;
  const auto s = synthetic::make_scenario(cfg);
  Fixture f{Dataset(s.dataset), DetectorRun("fast", group_by_image(s.fast), 0.07),
            DetectorRun("slow", group_by_image(s.slow), 7.74), {}};
  for (std::size_t i = 0; i < s.dataset.size(); ++i) f.scores.push_back({s.dataset[i].image_id, s.difficulty[i]});
  return f;
}

const Fixture& fixture() {
  static const Fixture f = make_fixture();
  return f;
}

Assignment by_difficulty(const Fixture& f, double fraction) {
  return difficulty_split(f.dataset.image_ids(), f.scores, {SplitMode::kDifficulty, fraction, std::nullopt, 0});
}

TradeoffPoint point(double f, SplitMode s, double map, double det, double pred) {
  TradeoffPoint p;
  p.fraction_easy = f;
  p.strategy = s;
  p.map = map;
  p.detection_time_s = det;
  p.predictor_time_s = pred;
  p.total_time_s = det + pred;
  if (s == SplitMode::kRandom) p.map_std = 0.001;
  return p;
}

}  // namespace

TEST_CASE("evaluate_split boundary identities") {
  const auto& f = fixture();
  const auto all_fast = evaluate_split(f.dataset, f.fast, f.slow, by_difficulty(f, 1.0), 0.05);
  CHECK(to_json(all_fast.report) == to_json(mean_average_precision(f.fast.detections(), f.dataset)));
  CHECK(all_fast.point.detection_time_s == 0.07);
  CHECK(all_fast.point.predictor_time_s == 0.0);
  CHECK(all_fast.point.total_time_s == 0.07);

  const auto all_slow = evaluate_split(f.dataset, f.fast, f.slow, by_difficulty(f, 0.0), 0.05);
  CHECK(to_json(all_slow.report) == to_json(mean_average_precision(f.slow.detections(), f.dataset)));
  CHECK(all_slow.point.total_time_s == 7.74);
  CHECK(mean_latency(f.slow, f.dataset) == 7.74);
}

TEST_CASE("time accounting at 50%-50% with constant latencies") {
  const auto& f = fixture();
  const auto ev = evaluate_split(f.dataset, f.fast, f.slow, by_difficulty(f, 0.5), 0.05);
  CHECK(std::abs(ev.point.total_time_s - 3.955) <= 1e-12);
  CHECK(ev.point.predictor_time_s == 0.05);
  CHECK(ev.point.fraction_easy == 0.5);
}

TEST_CASE("predictor charging") {
  const auto& f = fixture();
  const auto ids = f.dataset.image_ids();
  CHECK(evaluate_split(f.dataset, f.fast, f.slow, random_split(ids, 0.5, 1), 0.05).point.predictor_time_s == 0.0);
  CHECK(evaluate_split(f.dataset, f.fast, f.slow, by_difficulty(f, 1.0), 0.05, {}, true).point.predictor_time_s ==
        0.05);
  CHECK(evaluate_split(f.dataset, f.fast, f.slow, by_difficulty(f, 0.0), 0.05, {}, true).point.total_time_s ==
        doctest::Approx(7.79));
}

TEST_CASE("property: detection time is linear in the fraction with constant latencies") {
  const auto& f = fixture();
  for (int k = 0; k <= 40; ++k) {
    const double frac = k / 40.0;
    const auto ev = evaluate_split(f.dataset, f.fast, f.slow, by_difficulty(f, frac), 0.05);
    const double r = ev.point.fraction_easy;
    CHECK(std::abs(ev.point.detection_time_s - (r * 0.07 + (1 - r) * 7.74)) <= 1e-12);
    CHECK(std::abs(ev.point.total_time_s - (ev.point.detection_time_s + ev.point.predictor_time_s)) <= 1e-12);
  }
}

TEST_CASE("per-image latencies average over the run actually used") {
  const auto& f = fixture();
  std::map<ImageId, double> fast_lat, slow_lat;
  const auto ids = f.dataset.image_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    fast_lat[ids[i]] = 0.01 * static_cast<double>(i);
    slow_lat[ids[i]] = 1.0 + static_cast<double>(i);
  }
  const DetectorRun fast("fast", f.fast.detections(), fast_lat), slow("slow", f.slow.detections(), slow_lat);
  const Assignment a = random_split(ids, 0.25, 5);
  const auto ev = evaluate_split(f.dataset, fast, slow, a, 0.05);
  double want = 0.0;
  for (const auto& [id, r] : a.routes) want += r == Route::kEasy ? fast_lat[id] : slow_lat[id];
  want /= static_cast<double>(ids.size());
  CHECK(ev.point.detection_time_s == doctest::Approx(want).epsilon(1e-13));
  for (const auto& [id, r] : a.routes) CHECK(ev.source.at(id) == (r == Route::kEasy ? "fast" : "slow"));
}

TEST_CASE("sweep produces ordered points and honors repeats") {
  const auto& f = fixture();
  HarnessConfig cfg;
  cfg.seed = 3;
  const auto pts = sweep(f.dataset, f.fast, f.slow, f.scores, cfg);
  REQUIRE(pts.size() == 10);
  const std::vector<double> fractions{1.0, 0.75, 0.5, 0.25, 0.0};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(pts[2 * i].fraction_easy == fractions[i]);
    CHECK(pts[2 * i].strategy == SplitMode::kDifficulty);
    CHECK_FALSE(pts[2 * i].map_std.has_value());
    CHECK(pts[2 * i + 1].strategy == SplitMode::kRandom);
    CHECK(pts[2 * i + 1].map_std.has_value());
  }

  // The 50% random point aggregates exactly the five seeded evaluations.
  std::vector<double> maps;
  const auto ids = f.dataset.image_ids();
  for (std::uint64_t r = 0; r < 5; ++r) {
    maps.push_back(evaluate_split(f.dataset, f.fast, f.slow, random_split(ids, 0.5, 3 + r), 0.05).point.map);
  }
  double mean = 0.0;
  for (double m : maps) mean += m / 5.0;
  double ss = 0.0;
  for (double m : maps) ss += (m - mean) * (m - mean);
  CHECK(pts[5].map == doctest::Approx(mean).epsilon(1e-14));
  CHECK(*pts[5].map_std == doctest::Approx(std::sqrt(ss / 4.0)).epsilon(1e-12));
  CHECK(pts[5].predictor_time_s == 0.0);

  // Endpoints: both strategies see the same single assignment.
  CHECK(pts[0].map == pts[1].map);
  CHECK(*pts[1].map_std == 0.0);
  CHECK(pts[9].total_time_s == 7.74);

  CHECK(sweep(f.dataset, f.fast, f.slow, f.scores, cfg) == pts);
}

TEST_CASE("sweep options and errors") {
  const auto& f = fixture();
  HarnessConfig cfg;
  cfg.fractions = {0.0, 1.0, 1.0};
  cfg.repeats = 2;
  const auto ends = sweep(f.dataset, f.fast, f.slow, f.scores, cfg);
  REQUIRE(ends.size() == 4);
  CHECK(ends[0].fraction_easy == 1.0);
  CHECK(ends[3].fraction_easy == 0.0);

  const auto random_only = sweep(f.dataset, f.fast, f.slow, {}, cfg);
  REQUIRE(random_only.size() == 2);
  CHECK(random_only[0].strategy == SplitMode::kRandom);

  std::vector<DifficultyScore> partial(f.scores.begin(), f.scores.begin() + 3);
  CHECK_THROWS_AS(sweep(f.dataset, f.fast, f.slow, partial, cfg), Error);
  HarnessConfig bad;
  bad.repeats = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.predictor_cost_s = -0.1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.fractions = {1.2};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.fractions = {};
  CHECK_THROWS_AS(bad.validate(), Error);

  const DetectorRun uncovered("u", {}, std::map<ImageId, double>{});
  CHECK_THROWS_AS(sweep(f.dataset, uncovered, f.slow, f.scores, {}), Error);
}

TEST_CASE("render_report CSV") {
  const std::vector<TradeoffPoint> pts{point(0.5, SplitMode::kDifficulty, 0.74306, 3.906, 0.05),
                                       point(0.5, SplitMode::kRandom, 0.7131, 3.906, 0.0)};
  CHECK(render_report(pts, ReportFormat::kCsv) ==
        "strategy,fraction_easy,map,map_std,detection_time_s,predictor_time_s,total_time_s\n"
        "difficulty,0.50,0.7431,,3.91,0.05,3.96\n"
        "random,0.50,0.7131,0.0010,3.91,0.00,3.91\n");
  const auto back = parse_points_csv(render_report(pts, ReportFormat::kCsv));
  REQUIRE(back.size() == 2);
  CHECK(back[1].map_std == 0.001);
  CHECK(back[0].total_time_s == 3.96);
  CHECK_THROWS_AS(render_report({}, ReportFormat::kCsv), Error);
  CHECK_THROWS_AS(parse_points_csv("bogus,header\n"), Error);
  CHECK_THROWS_AS(
      parse_points_csv("strategy,fraction_easy,map,map_std,detection_time_s,predictor_time_s,total_time_s\nrandom,0.5\n"),
      Error);
}

TEST_CASE("render_report markdown: single point, endpoints, missing strategy") {
  const std::vector<TradeoffPoint> one{point(0.75, SplitMode::kDifficulty, 0.6981, 2.38, 0.05)};
  CHECK(render_report(one, ReportFormat::kMarkdown, {"A", "B"}) ==
        "A (left) to B (right)\n\n"
        "| | 75%-25% |\n|---|---:|\n"
        "| Random Split (mAP) | n/a |\n"
        "| Easy-versus-Hard Split (mAP) | 0.6981 |\n"
        "| Image Difficulty Prediction Time (s) | 0.05 |\n"
        "| Object Detection Time (s) | 2.38 |\n"
        "| Total Time (s) | 2.43 |\n");

  const std::vector<TradeoffPoint> ends{point(1.0, SplitMode::kDifficulty, 0.6668, 0.07, 0.0),
                                        point(0.0, SplitMode::kDifficulty, 0.7837, 7.74, 0.0),
                                        point(1.0, SplitMode::kRandom, 0.6668, 0.07, 0.0),
                                        point(0.0, SplitMode::kRandom, 0.7837, 7.74, 0.0)};
  const std::string md = render_report(ends, ReportFormat::kMarkdown);
  CHECK(md.find("| | 100%-0% | 0%-100% |") != std::string::npos);
  CHECK(md.find("| Image Difficulty Prediction Time (s) | - | - |") != std::string::npos);
  CHECK(md.find("| Total Time (s) | 0.07 | 7.74 |") != std::string::npos);

  const std::vector<TradeoffPoint> charged{point(1.0, SplitMode::kDifficulty, 0.6668, 0.07, 0.05)};
  CHECK(render_report(charged, ReportFormat::kMarkdown).find("| Image Difficulty Prediction Time (s) | 0.05 |") !=
        std::string::npos);
}

TEST_CASE("compare_strategies") {
  const std::vector<TradeoffPoint> t1{
      point(1.0, SplitMode::kDifficulty, 0.6668, 0.07, 0), point(1.0, SplitMode::kRandom, 0.6668, 0.07, 0),
      point(0.5, SplitMode::kDifficulty, 0.7431, 4.08, 0.05), point(0.5, SplitMode::kRandom, 0.7131, 4.08, 0),
      point(0.0, SplitMode::kRandom, 0.7837, 7.74, 0), point(0.0, SplitMode::kDifficulty, 0.7837, 7.74, 0)};
  const auto d = compare_strategies(t1);
  REQUIRE(d.size() == 3);
  CHECK(d[0].fraction_easy == 1.0);
  CHECK(d[0].delta == 0.0);
  CHECK(fmt::format("{:+.4f}", d[1].delta) == "+0.0300");
  CHECK(d[2].delta == 0.0);

  const std::vector<TradeoffPoint> t2{point(0.5, SplitMode::kDifficulty, 0.7513, 4.33, 0.05),
                                      point(0.5, SplitMode::kRandom, 0.7178, 4.33, 0)};
  CHECK(fmt::format("{:+.4f}", compare_strategies(t2)[0].delta) == "+0.0335");

  const std::vector<TradeoffPoint> lonely{point(0.5, SplitMode::kDifficulty, 0.7, 1, 0)};
  CHECK_THROWS_AS(compare_strategies(lonely), Error);
  const std::vector<TradeoffPoint> lonely_random{point(0.5, SplitMode::kRandom, 0.7, 1, 0)};
  CHECK_THROWS_AS(compare_strategies(lonely_random), Error);
}

TEST_CASE("split labels and report formats") {
  CHECK(split_label(1.0) == "100%-0%");
  CHECK(split_label(0.75) == "75%-25%");
  CHECK(split_label(0.0) == "0%-100%");
  CHECK(split_label(1.0 / 3.0) == "33.3%-66.7%");
  CHECK(parse_report_format("csv") == ReportFormat::kCsv);
  CHECK(parse_report_format("markdown") == ReportFormat::kMarkdown);
  CHECK_THROWS_AS(parse_report_format("xlsx"), Error);
}
