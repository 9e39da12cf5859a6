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

#include "easyhard/tradeoff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

namespace easyhard {

void HarnessConfig::validate() const {
  if (fractions.empty()) throw Error("at least one split fraction is required");
  for (const double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error(fmt::format("fraction {} outside [0, 1]", f));
  }
  if (repeats < 1) throw Error("random repeats must be at least 1");
  if (!(predictor_cost_s >= 0.0) || !std::isfinite(predictor_cost_s)) {
    throw Error(fmt::format("predictor cost must be non-negative, got {}", predictor_cost_s));
  }
}

namespace {

bool is_endpoint(double f) { return f == 0.0 || f == 1.0; }

bool same_fraction(double a, double b) { return std::abs(a - b) < 1e-9; }

}  // namespace

double mean_latency(const DetectorRun& run, const Dataset& dataset) {
  if (dataset.empty()) throw Error("mean latency of an empty dataset");
  if (const auto c = run.constant_latency()) return *c;
  double sum = 0.0;
  for (const auto& img : dataset.images()) sum += run.latency_for(img.image_id);
  return sum / static_cast<double>(dataset.size());
}

SplitEvaluation evaluate_split(const Dataset& dataset, const DetectorRun& fast,
                               const DetectorRun& slow, const Assignment& assignment,
                               double predictor_cost_s, const EvalConfig& eval,
                               bool charge_predictor_always) {
  if (assignment.routes.size() != dataset.size()) {
    throw Error(fmt::format("assignment routes {} images but the dataset has {}",
                            assignment.routes.size(), dataset.size()));
  }
  for (const auto& [id, r] : assignment.routes) {
    if (!dataset.contains(id)) throw Error(fmt::format("assignment names unknown image \"{}\"", id));
  }
  DispatchedRun combined = dispatch(assignment, fast, slow);

  SplitEvaluation out;
  out.report = mean_average_precision(combined.detections, dataset, eval);
  out.source = std::move(combined.source);

  TradeoffPoint& p = out.point;
  p.strategy = assignment.policy.mode;
  p.fraction_easy = assignment.policy.fraction_easy.value_or(assignment.realized_fraction_easy);
  p.map = out.report.map;
  std::unordered_map<ImageId, Route> route_by_id(assignment.routes.begin(), assignment.routes.end());
  std::size_t n_easy = 0;
  double easy_sum = 0.0, hard_sum = 0.0;
  for (const auto& img : dataset.images()) {
    const double t = combined.latency_s.at(img.image_id);
    if (route_by_id.at(img.image_id) == Route::kEasy) {
      easy_sum += t;
      ++n_easy;
    } else {
      hard_sum += t;
    }
  }
  const std::size_t n_hard = dataset.size() - n_easy;
  const double share_easy = static_cast<double>(n_easy) / static_cast<double>(dataset.size());
  const double share_hard = static_cast<double>(n_hard) / static_cast<double>(dataset.size());
  auto group_mean = [](const DetectorRun& run, double sum, std::size_t count) {
    if (count == 0) return 0.0;
    return run.constant_latency().value_or(sum / static_cast<double>(count));
  };
  p.detection_time_s = share_easy * group_mean(fast, easy_sum, n_easy) +
                       share_hard * group_mean(slow, hard_sum, n_hard);
  const bool charged = p.strategy == SplitMode::kDifficulty &&
                       (charge_predictor_always || !is_endpoint(p.fraction_easy));
  p.predictor_time_s = charged ? predictor_cost_s : 0.0;
  p.total_time_s = p.detection_time_s + p.predictor_time_s;
  return out;
}

std::vector<TradeoffPoint> sweep(const Dataset& dataset, const DetectorRun& fast,
                                 const DetectorRun& slow,
                                 std::span<const DifficultyScore> difficulty_scores,
                                 const HarnessConfig& config) {
  config.validate();
  if (dataset.empty()) throw Error("cannot sweep an empty dataset");
  fast.check_covers(dataset);
  slow.check_covers(dataset);

  std::vector<double> fractions = config.fractions;
  std::sort(fractions.begin(), fractions.end(), std::greater<>());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());

  const std::vector<ImageId> ids = dataset.image_ids();
  std::vector<TradeoffPoint> points;
  for (const double f : fractions) {
    if (!difficulty_scores.empty()) {
      SplitPolicy policy;
      policy.mode = SplitMode::kDifficulty;
      policy.fraction_easy = f;
      const Assignment a = difficulty_split(ids, difficulty_scores, policy);
      points.push_back(evaluate_split(dataset, fast, slow, a, config.predictor_cost_s,
                                      config.eval, config.charge_predictor_always)
                           .point);
    }

    std::vector<double> maps;
    double detection = 0.0, predictor = 0.0;
    for (std::size_t r = 0; r < config.repeats; ++r) {
      const Assignment a = random_split(ids, f, config.seed + r);
      const TradeoffPoint p = evaluate_split(dataset, fast, slow, a, config.predictor_cost_s,
                                             config.eval, config.charge_predictor_always)
                                  .point;
      maps.push_back(p.map);
      const double seen = static_cast<double>(r + 1);
      detection += (p.detection_time_s - detection) / seen;
      predictor += (p.predictor_time_s - predictor) / seen;
    }
    const double k = static_cast<double>(config.repeats);
    TradeoffPoint rp;
    rp.fraction_easy = f;
    rp.strategy = SplitMode::kRandom;
    double sum = 0.0;
    for (const double m : maps) sum += m;
    rp.map = sum / k;
    double ss = 0.0;
    for (const double m : maps) ss += (m - rp.map) * (m - rp.map);
    rp.map_std = maps.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    rp.detection_time_s = detection;
    rp.predictor_time_s = predictor;
    rp.total_time_s = rp.detection_time_s + rp.predictor_time_s;
    points.push_back(rp);
  }
  return points;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "markdown" || text == "md") return ReportFormat::kMarkdown;
  throw Error(fmt::format("unknown report format \"{}\" (expected csv or markdown)", text));
}

std::string split_label(double fraction_easy) {
  const double fast_pct = fraction_easy * 100.0;
  const double slow_pct = 100.0 - fast_pct;
  auto pct = [](double v) {
    const double rounded = std::round(v);
    return std::abs(v - rounded) < 1e-9 ? fmt::format("{}%", static_cast<long long>(rounded))
                                        : fmt::format("{:.1f}%", v);
  };
  return pct(fast_pct) + "-" + pct(slow_pct);
}

namespace {

constexpr std::string_view kCsvHeader =
    "strategy,fraction_easy,map,map_std,detection_time_s,predictor_time_s,total_time_s";

std::string render_csv(std::span<const TradeoffPoint> points) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& p : points) {
    out += fmt::format("{},{:.2f},{:.4f},{},{:.2f},{:.2f},{:.2f}\n", to_string(p.strategy),
                       p.fraction_easy, p.map,
                       p.map_std ? fmt::format("{:.4f}", *p.map_std) : std::string(),
                       p.detection_time_s, p.predictor_time_s, p.total_time_s);
  }
  return out;
}

const TradeoffPoint* find_point(std::span<const TradeoffPoint> points, double f, SplitMode s) {
  for (const auto& p : points) {
    if (p.strategy == s && same_fraction(p.fraction_easy, f)) return &p;
  }
  return nullptr;
}

std::string render_markdown(std::span<const TradeoffPoint> points, const ReportLabels& labels) {
  std::vector<double> fractions;
  for (const auto& p : points) {
    if (std::none_of(fractions.begin(), fractions.end(),
                     [&](double f) { return same_fraction(f, p.fraction_easy); })) {
      fractions.push_back(p.fraction_easy);
    }
  }
  std::sort(fractions.begin(), fractions.end(), std::greater<>());

  std::string out = fmt::format("{} (left) to {} (right)\n\n", labels.fast, labels.slow);
  out += "| |";
  for (const double f : fractions) out += fmt::format(" {} |", split_label(f));
  out += "\n|---|";
  for (std::size_t i = 0; i < fractions.size(); ++i) out += "---:|";
  out += '\n';

  auto row = [&](std::string_view title, auto&& cell) {
    out += fmt::format("| {} |", title);
    for (const double f : fractions) out += fmt::format(" {} |", cell(f));
    out += '\n';
  };
  auto map_cell = [&](SplitMode s) {
    return [&points, s](double f) {
      const TradeoffPoint* p = find_point(points, f, s);
      return p ? fmt::format("{:.4f}", p->map) : std::string("n/a");
    };
  };
  // Time rows follow the difficulty strategy when present.
  auto timing = [&](double f) {
    const TradeoffPoint* p = find_point(points, f, SplitMode::kDifficulty);
    return p ? p : find_point(points, f, SplitMode::kRandom);
  };

  row("Random Split (mAP)", map_cell(SplitMode::kRandom));
  row("Easy-versus-Hard Split (mAP)", map_cell(SplitMode::kDifficulty));
  row("Image Difficulty Prediction Time (s)", [&](double f) {
    const TradeoffPoint* p = timing(f);
    if (!p) return std::string("n/a");
    if (is_endpoint(f) && p->predictor_time_s == 0.0) return std::string("-");
    return fmt::format("{:.2f}", p->predictor_time_s);
  });
  row("Object Detection Time (s)", [&](double f) {
    const TradeoffPoint* p = timing(f);
    return p ? fmt::format("{:.2f}", p->detection_time_s) : std::string("n/a");
  });
  row("Total Time (s)", [&](double f) {
    const TradeoffPoint* p = timing(f);
    return p ? fmt::format("{:.2f}", p->total_time_s) : std::string("n/a");
  });
  return out;
}

}  // namespace

std::string render_report(std::span<const TradeoffPoint> points, ReportFormat format,
                          const ReportLabels& labels) {
  if (points.empty()) throw Error("nothing to report: no trade-off points");
  return format == ReportFormat::kCsv ? render_csv(points) : render_markdown(points, labels);
}

std::vector<TradeoffPoint> parse_points_csv(std::string_view text, std::string_view origin) {
  std::vector<TradeoffPoint> points;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kCsvHeader) throw Error(fmt::format("{}:1: unexpected CSV header", origin));
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) {
      throw Error(fmt::format("{}:{}: expected 7 columns, got {}", origin, line_no, cells.size()));
    }
    TradeoffPoint p;
    try {
      if (cells[0] == "difficulty") {
        p.strategy = SplitMode::kDifficulty;
      } else if (cells[0] == "random") {
        p.strategy = SplitMode::kRandom;
      } else {
        throw Error("unknown strategy");
      }
      p.fraction_easy = std::stod(cells[1]);
      p.map = std::stod(cells[2]);
      if (!cells[3].empty()) p.map_std = std::stod(cells[3]);
      p.detection_time_s = std::stod(cells[4]);
      p.predictor_time_s = std::stod(cells[5]);
      p.total_time_s = std::stod(cells[6]);
    } catch (const std::exception& e) {
      throw Error(fmt::format("{}:{}: bad value ({})", origin, line_no, e.what()));
    }
    points.push_back(p);
  }
  return points;
}

std::vector<StrategyDelta> compare_strategies(std::span<const TradeoffPoint> points) {
  std::vector<StrategyDelta> deltas;
  for (const auto& p : points) {
    if (p.strategy != SplitMode::kDifficulty) continue;
    const TradeoffPoint* r = find_point(points, p.fraction_easy, SplitMode::kRandom);
    if (!r) {
      throw Error(fmt::format("no random-split point at fraction {}", p.fraction_easy));
    }
    deltas.push_back({p.fraction_easy, p.map - r->map});
  }
  for (const auto& p : points) {
    if (p.strategy == SplitMode::kRandom &&
        !find_point(points, p.fraction_easy, SplitMode::kDifficulty)) {
      throw Error(fmt::format("no difficulty-split point at fraction {}", p.fraction_easy));
    }
  }
  std::sort(deltas.begin(), deltas.end(), [](const StrategyDelta& a, const StrategyDelta& b) {
    return a.fraction_easy > b.fraction_easy;
  });
  return deltas;
}

}  // namespace easyhard
