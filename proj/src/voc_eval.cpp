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

#include "easyhard/voc_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace easyhard {

std::string_view to_string(ApMode mode) {
  return mode == ApMode::kContinuous ? "continuous" : "11pt";
}

ApMode parse_ap_mode(std::string_view text) {
  if (text == "continuous") return ApMode::kContinuous;
  if (text == "11pt") return ApMode::kElevenPoint;
  throw Error(fmt::format("unknown AP mode \"{}\" (expected continuous or 11pt)", text));
}

std::string_view to_string(DifficultPolicy policy) {
  return policy == DifficultPolicy::kIgnore ? "ignore" : "count";
}

DifficultPolicy parse_difficult_policy(std::string_view text) {
  if (text == "ignore") return DifficultPolicy::kIgnore;
  if (text == "count") return DifficultPolicy::kCountNormally;
  throw Error(fmt::format("unknown difficult policy \"{}\" (expected ignore or count)", text));
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<MatchOutcome> match_detections(std::span<const Detection> detections,
                                           std::span<const GroundTruthObject> ground_truths,
                                           double iou_threshold, DifficultPolicy policy) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw Error(fmt::format("IoU threshold must lie in (0, 1), got {}", iou_threshold));
  }
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<bool> consumed(ground_truths.size(), false);
  std::vector<MatchOutcome> outcomes;
  outcomes.reserve(detections.size());
  for (const std::size_t di : order) {
    double best = -1.0;
    std::optional<std::size_t> best_gt;
    for (std::size_t g = 0; g < ground_truths.size(); ++g) {
      if (consumed[g]) continue;
      const double o = iou(detections[di].box, ground_truths[g].box);
      if (o > best) {
        best = o;
        best_gt = g;
      }
    }
    MatchOutcome out{di, Verdict::kFalsePositive, std::nullopt};
    if (best_gt && best > iou_threshold) {
      if (ground_truths[*best_gt].difficult && policy == DifficultPolicy::kIgnore) {
        out.verdict = Verdict::kIgnored;
      } else {
        out.verdict = Verdict::kTruePositive;
        out.ground_truth_index = best_gt;
        consumed[*best_gt] = true;
      }
    }
    outcomes.push_back(out);
  }
  return outcomes;
}

PRCurve pr_curve_from_verdicts(std::span<const Verdict> ranked, std::size_t total_positives) {
  PRCurve curve;
  curve.total_positives = total_positives;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const Verdict v : ranked) {
    if (v == Verdict::kIgnored) continue;
    (v == Verdict::kTruePositive ? tp : fp) += 1;
    const double recall =
        total_positives == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(total_positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    curve.points.push_back({recall, precision});
  }
  return curve;
}

namespace {

struct RankedVerdict {
  double score;
  const ImageId* image_id;
  std::size_t input_index;
  Verdict verdict;
};

std::size_t count_positives(std::span<const GroundTruthObject> gts, DifficultPolicy policy) {
  return static_cast<std::size_t>(std::count_if(gts.begin(), gts.end(), [&](const auto& g) {
    return policy == DifficultPolicy::kCountNormally || !g.difficult;
  }));
}

// Verdicts of every detection of one class, ranked globally.
PRCurve class_curve(const std::map<ImageId, std::vector<Detection>>& dets_by_image,
                    const Dataset& dataset, std::string_view class_label,
                    const EvalConfig& config) {
  std::vector<RankedVerdict> ranked;
  std::size_t positives = 0;
  std::vector<GroundTruthObject> gts;
  std::size_t input_index = 0;
  for (const auto& img : dataset.images()) {
    gts.clear();
    for (const auto& o : img.objects) {
      if (o.class_label == class_label) gts.push_back(o);
    }
    positives += count_positives(gts, config.difficult);

    const auto it = dets_by_image.find(img.image_id);
    if (it == dets_by_image.end()) continue;
    const std::vector<Detection>& dets = it->second;
    for (const auto& m : match_detections(dets, gts, config.iou_threshold, config.difficult)) {
      ranked.push_back({dets[m.detection_index].score, &img.image_id,
                        input_index + m.detection_index, m.verdict});
    }
    input_index += dets.size();
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedVerdict& a, const RankedVerdict& b) {
    if (a.score != b.score) return a.score > b.score;
    if (*a.image_id != *b.image_id) return *a.image_id < *b.image_id;
    return a.input_index < b.input_index;
  });
  std::vector<Verdict> verdicts;
  verdicts.reserve(ranked.size());
  for (const auto& r : ranked) verdicts.push_back(r.verdict);
  return pr_curve_from_verdicts(verdicts, positives);
}

bool keep(const Detection& d, const EvalConfig& config) {
  return !config.score_threshold || d.score >= *config.score_threshold;
}

}  // namespace

PRCurve pr_curve(std::span<const Detection> detections, const Dataset& dataset,
                 std::string_view class_label, const EvalConfig& config) {
  std::map<ImageId, std::vector<Detection>> by_image;
  for (const auto& d : detections) {
    if (d.class_label != class_label || !keep(d, config)) continue;
    if (!dataset.contains(d.image_id)) {
      throw Error(fmt::format("detection for unknown image \"{}\"", d.image_id));
    }
    by_image[d.image_id].push_back(d);
  }
  return class_curve(by_image, dataset, class_label, config);
}

double average_precision(const PRCurve& curve, ApMode mode) {
  const auto& pts = curve.points;
  if (curve.total_positives == 0 || pts.empty()) return 0.0;

  if (mode == ApMode::kElevenPoint) {
    double sum = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double r = t / 10.0;
      double p = 0.0;
      for (const auto& pt : pts) {
        if (pt.recall >= r) p = std::max(p, pt.precision);
      }
      sum += p;
    }
    return sum / 11.0;
  }

  // Sentinels (0, 0) and (1, 0), then the right envelope of precision.
  std::vector<double> rec{0.0};
  std::vector<double> prec{0.0};
  for (const auto& pt : pts) {
    rec.push_back(pt.recall);
    prec.push_back(pt.precision);
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i) {
    if (rec[i] != rec[i - 1]) ap += (rec[i] - rec[i - 1]) * prec[i];
  }
  return ap;
}

EvalReport mean_average_precision(const DetectionsByImage& detections, const Dataset& dataset,
                                  const EvalConfig& config) {
  if (dataset.empty()) throw Error("cannot evaluate on an empty dataset");

  std::set<std::string> classes;
  for (const auto& img : dataset.images()) {
    for (const auto& o : img.objects) classes.insert(o.class_label);
  }

  // Per class, per image detections after score filtering.
  std::map<std::string, std::map<ImageId, std::vector<Detection>>> by_class;
  for (const auto& [id, dets] : detections) {
    if (dets.empty()) continue;
    if (!dataset.contains(id)) throw Error(fmt::format("detection for unknown image \"{}\"", id));
    for (const auto& d : dets) {
      if (classes.contains(d.class_label) && keep(d, config)) {
        by_class[d.class_label][id].push_back(d);
      }
    }
  }

  EvalReport report;
  report.ap_mode = config.ap_mode;
  report.iou_threshold = config.iou_threshold;
  static const std::map<ImageId, std::vector<Detection>> kNone;
  for (const auto& cls : classes) {
    const auto it = by_class.find(cls);
    const PRCurve curve = class_curve(it == by_class.end() ? kNone : it->second, dataset, cls, config);
    if (curve.total_positives == 0) continue;
    report.per_class.emplace(cls, average_precision(curve, config.ap_mode));
  }
  if (report.per_class.empty()) throw Error("no class has a ground-truth positive to evaluate");
  double sum = 0.0;
  for (const auto& [cls, ap] : report.per_class) sum += ap;
  report.map = sum / static_cast<double>(report.per_class.size());
  return report;
}

std::string to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["map"] = report.map;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (const auto& [cls, ap] : report.per_class) per_class[cls] = ap;
  j["per_class"] = std::move(per_class);
  j["ap_mode"] = to_string(report.ap_mode);
  j["iou_threshold"] = report.iou_threshold;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Kendall's tau-b, Knight's O(n log n) formulation.

namespace {

using Count = long long;

Count tie_pairs_in_sorted(std::span<const double> v) {
  Count pairs = 0;
  Count run = 1;
  for (std::size_t i = 1; i <= v.size(); ++i) {
    if (i < v.size() && v[i] == v[i - 1]) {
      ++run;
    } else {
      pairs += run * (run - 1) / 2;
      run = 1;
    }
  }
  return pairs;
}

// Sorts `v` ascending and returns the number of inversions removed.
Count merge_sort_swaps(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                       std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  Count swaps = merge_sort_swaps(v, buf, lo, mid) + merge_sort_swaps(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<Count>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

std::optional<double> kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(fmt::format("kendall_tau: length mismatch ({} vs {})", x.size(), y.size()));
  }
  if (x.size() < 2) throw Error("kendall_tau: need at least two observations");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw Error("kendall_tau: non-finite value");
    }
  }
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }

  const Count n0 = static_cast<Count>(n) * static_cast<Count>(n - 1) / 2;
  const Count tx = tie_pairs_in_sorted(xs);
  Count txy = 0;
  {
    Count run = 1;
    for (std::size_t i = 1; i <= n; ++i) {
      if (i < n && xs[i] == xs[i - 1] && ys[i] == ys[i - 1]) {
        ++run;
      } else {
        txy += run * (run - 1) / 2;
        run = 1;
      }
    }
  }
  std::vector<double> buf(n);
  const Count swaps = merge_sort_swaps(ys, buf, 0, n);
  const Count ty = tie_pairs_in_sorted(ys);

  if (tx == n0 || ty == n0) return std::nullopt;
  const Count numerator = n0 - tx - ty + txy - 2 * swaps;  // concordant - discordant
  return static_cast<double>(numerator) /
         std::sqrt(static_cast<double>(n0 - tx) * static_cast<double>(n0 - ty));
}

}  // namespace easyhard
