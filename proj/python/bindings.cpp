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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "easyhard/core_data.hpp"
#include "easyhard/difficulty.hpp"
#include "easyhard/router.hpp"
#include "easyhard/tradeoff.hpp"
#include "easyhard/voc_eval.hpp"

namespace py = pybind11;
using namespace easyhard;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Easy-versus-hard routing between a fast and a slow object detector";
  m.attr("__version__") = "0.1.0";
  py::register_exception<Error>(m, "EasyhardError", PyExc_ValueError);

  // core data ---------------------------------------------------------------
  py::class_<BoundingBox>(m, "BoundingBox")
      .def(py::init([](double x0, double y0, double x1, double y1) {
             BoundingBox b{x0, y0, x1, y1};
             validate_box(b);
             return b;
           }),
           py::arg("x_min"), py::arg("y_min"), py::arg("x_max"), py::arg("y_max"))
      .def_readwrite("x_min", &BoundingBox::x_min)
      .def_readwrite("y_min", &BoundingBox::y_min)
      .def_readwrite("x_max", &BoundingBox::x_max)
      .def_readwrite("y_max", &BoundingBox::y_max)
      .def("area", &BoundingBox::area)
      .def("__repr__", [](const BoundingBox& b) {
        return "BoundingBox(" + std::to_string(b.x_min) + ", " + std::to_string(b.y_min) + ", " +
               std::to_string(b.x_max) + ", " + std::to_string(b.y_max) + ")";
      });

  py::class_<GroundTruthObject>(m, "GroundTruthObject")
      .def(py::init<std::string, BoundingBox, bool>(), py::arg("class_label"), py::arg("box"),
           py::arg("difficult") = false)
      .def_readwrite("class_label", &GroundTruthObject::class_label)
      .def_readwrite("box", &GroundTruthObject::box)
      .def_readwrite("difficult", &GroundTruthObject::difficult);

  py::class_<ImageRecord>(m, "ImageRecord")
      .def(py::init<ImageId, int, int, std::vector<GroundTruthObject>>(), py::arg("image_id"),
           py::arg("width"), py::arg("height"), py::arg("objects"))
      .def_readwrite("image_id", &ImageRecord::image_id)
      .def_readwrite("width", &ImageRecord::width)
      .def_readwrite("height", &ImageRecord::height)
      .def_readwrite("objects", &ImageRecord::objects);

  py::class_<Detection>(m, "Detection")
      .def(py::init<ImageId, std::string, double, BoundingBox>(), py::arg("image_id"),
           py::arg("class_label"), py::arg("score"), py::arg("box"))
      .def_readwrite("image_id", &Detection::image_id)
      .def_readwrite("class_label", &Detection::class_label)
      .def_readwrite("score", &Detection::score)
      .def_readwrite("box", &Detection::box);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<std::vector<ImageRecord>>(), py::arg("images"))
      .def("__len__", &Dataset::size)
      .def("images", &Dataset::images)
      .def("image_ids", &Dataset::image_ids)
      .def("__contains__", &Dataset::contains);

  py::class_<DetectorRun>(m, "DetectorRun")
      .def(py::init([](std::string id, const std::vector<Detection>& dets, double latency) {
             return DetectorRun(std::move(id), group_by_image(dets), latency);
           }),
           py::arg("detector_id"), py::arg("detections"), py::arg("latency_s"))
      .def(py::init([](std::string id, const std::vector<Detection>& dets,
                       std::map<ImageId, double> latency) {
             return DetectorRun(std::move(id), group_by_image(dets), std::move(latency));
           }),
           py::arg("detector_id"), py::arg("detections"), py::arg("latency_s"))
      .def_property_readonly("detector_id", &DetectorRun::detector_id)
      .def("detections", [](const DetectorRun& r) { return flatten(r.detections()); })
      .def("latency_for", &DetectorRun::latency_for);

  py::class_<FeatureRecord>(m, "FeatureRecord")
      .def(py::init<ImageId, std::vector<double>>(), py::arg("image_id"), py::arg("vector"))
      .def_readwrite("image_id", &FeatureRecord::image_id)
      .def_readwrite("vector", &FeatureRecord::vector);

  py::class_<DifficultyScore>(m, "DifficultyScore")
      .def(py::init<ImageId, double>(), py::arg("image_id"), py::arg("score"))
      .def_readwrite("image_id", &DifficultyScore::image_id)
      .def_readwrite("score", &DifficultyScore::score);

  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("load_detector_run", &load_detector_run, py::arg("path"), py::arg("latency"),
        py::arg("detector_id") = std::string());
  m.def("load_features", &load_features, py::arg("path"));
  m.def("load_difficulty", &load_difficulty, py::arg("path"));

  // evaluation --------------------------------------------------------------
  py::enum_<ApMode>(m, "ApMode")
      .value("CONTINUOUS", ApMode::kContinuous)
      .value("ELEVEN_POINT", ApMode::kElevenPoint);
  py::enum_<DifficultPolicy>(m, "DifficultPolicy")
      .value("IGNORE", DifficultPolicy::kIgnore)
      .value("COUNT", DifficultPolicy::kCountNormally);
  py::enum_<Verdict>(m, "Verdict")
      .value("TRUE_POSITIVE", Verdict::kTruePositive)
      .value("FALSE_POSITIVE", Verdict::kFalsePositive)
      .value("IGNORED", Verdict::kIgnored);

  py::class_<EvalConfig>(m, "EvalConfig")
      .def(py::init<>())
      .def_readwrite("iou_threshold", &EvalConfig::iou_threshold)
      .def_readwrite("ap_mode", &EvalConfig::ap_mode)
      .def_readwrite("difficult", &EvalConfig::difficult)
      .def_readwrite("score_threshold", &EvalConfig::score_threshold);

  py::class_<PRCurve>(m, "PRCurve")
      .def_property_readonly("points",
                             [](const PRCurve& c) {
                               std::vector<std::pair<double, double>> pts;
                               for (const auto& p : c.points) pts.emplace_back(p.recall, p.precision);
                               return pts;
                             })
      .def_readonly("total_positives", &PRCurve::total_positives);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("map", &EvalReport::map)
      .def_readonly("per_class", &EvalReport::per_class)
      .def_readonly("ap_mode", &EvalReport::ap_mode)
      .def_readonly("iou_threshold", &EvalReport::iou_threshold)
      .def("to_json", [](const EvalReport& r) { return to_json(r); });

  m.def("iou", &iou, py::arg("a"), py::arg("b"));
  m.def(
      "match_detections",
      [](const std::vector<Detection>& dets, const std::vector<GroundTruthObject>& gts,
         double thr, DifficultPolicy policy) {
        std::vector<std::tuple<std::size_t, Verdict, std::optional<std::size_t>>> out;
        for (const auto& o : match_detections(dets, gts, thr, policy)) {
          out.emplace_back(o.detection_index, o.verdict, o.ground_truth_index);
        }
        return out;
      },
      py::arg("detections"), py::arg("ground_truths"), py::arg("iou_threshold") = 0.5,
      py::arg("policy") = DifficultPolicy::kIgnore);
  m.def(
      "pr_curve_from_verdicts",
      [](const std::vector<Verdict>& v, std::size_t positives) {
        return pr_curve_from_verdicts(v, positives);
      },
      py::arg("ranked"), py::arg("total_positives"));
  m.def("average_precision", &average_precision, py::arg("curve"),
        py::arg("mode") = ApMode::kContinuous);
  m.def(
      "mean_average_precision",
      [](const std::vector<Detection>& dets, const Dataset& ds, const EvalConfig& cfg) {
        return mean_average_precision(group_by_image(dets), ds, cfg);
      },
      py::arg("detections"), py::arg("dataset"), py::arg("config") = EvalConfig{});
  m.def(
      "kendall_tau",
      [](const std::vector<double>& x, const std::vector<double>& y) { return kendall_tau(x, y); },
      py::arg("x"), py::arg("y"));

  // difficulty --------------------------------------------------------------
  py::class_<SvrConfig>(m, "SvrConfig")
      .def(py::init<>())
      .def_readwrite("nu", &SvrConfig::nu)
      .def_readwrite("c", &SvrConfig::c)
      .def_readwrite("tolerance", &SvrConfig::tolerance)
      .def_readwrite("max_iterations", &SvrConfig::max_iterations);

  py::class_<DifficultyModel>(m, "DifficultyModel")
      .def(py::init([](std::vector<double> w, double b) {
             DifficultyModel model;
             model.weights = std::move(w);
             model.bias = b;
             return model;
           }),
           py::arg("weights"), py::arg("bias"))
      .def_readonly("weights", &DifficultyModel::weights)
      .def_readonly("bias", &DifficultyModel::bias)
      .def_readonly("config", &DifficultyModel::config)
      .def("to_json", [](const DifficultyModel& model) { return model_to_json(model); });

  py::class_<SvrSolution>(m, "SvrSolution")
      .def_readonly("model", &SvrSolution::model)
      .def_readonly("coef", &SvrSolution::coef)
      .def_readonly("epsilon", &SvrSolution::epsilon)
      .def_readonly("dual_objective", &SvrSolution::dual_objective)
      .def_readonly("iterations", &SvrSolution::iterations);

  m.def(
      "l2_normalize", [](const std::vector<double>& v) { return l2_normalize(v); }, py::arg("v"));
  m.def(
      "solve_nu_svr",
      [](const std::vector<std::vector<double>>& x, const std::vector<double>& y,
         const SvrConfig& cfg) { return solve_nu_svr(x, y, cfg); },
      py::arg("features"), py::arg("targets"), py::arg("config") = SvrConfig{});
  m.def(
      "train_nu_svr",
      [](const std::vector<std::vector<double>>& x, const std::vector<double>& y,
         const SvrConfig& cfg) { return train_nu_svr(x, y, cfg); },
      py::arg("features"), py::arg("targets"), py::arg("config") = SvrConfig{});
  m.def(
      "predict_difficulty",
      [](const DifficultyModel& model, const std::vector<double>& f, bool normalize) {
        return predict_difficulty(model, f,
                                  normalize ? InputScaling::kNormalize : InputScaling::kPreNormalized);
      },
      py::arg("model"), py::arg("feature"), py::arg("normalize") = true);
  m.def(
      "evaluate_predictor",
      [](const DifficultyModel& model, const std::vector<FeatureRecord>& f,
         const std::vector<DifficultyScore>& gt) { return evaluate_predictor(model, f, gt); },
      py::arg("model"), py::arg("features"), py::arg("ground_truth"));

  // routing -----------------------------------------------------------------
  py::enum_<Route>(m, "Route").value("EASY", Route::kEasy).value("HARD", Route::kHard);
  py::enum_<SplitMode>(m, "SplitMode")
      .value("DIFFICULTY", SplitMode::kDifficulty)
      .value("RANDOM", SplitMode::kRandom);

  py::class_<Assignment>(m, "Assignment")
      .def_readonly("routes", &Assignment::routes)
      .def_readonly("realized_fraction_easy", &Assignment::realized_fraction_easy)
      .def("easy_count", &Assignment::easy_count)
      .def("to_jsonl", [](const Assignment& a) { return serialize_assignment(a); });

  m.def(
      "threshold_for_fraction",
      [](const std::vector<DifficultyScore>& s, double f) { return threshold_for_fraction(s, f); },
      py::arg("scores"), py::arg("fraction_easy"));
  m.def("route", &route, py::arg("score"), py::arg("threshold"));
  m.def(
      "random_split",
      [](const std::vector<ImageId>& ids, double f, std::uint64_t seed) {
        return random_split(ids, f, seed);
      },
      py::arg("image_ids"), py::arg("fraction_easy"), py::arg("seed"));
  m.def(
      "difficulty_split",
      [](const std::vector<ImageId>& ids, const std::vector<DifficultyScore>& scores,
         std::optional<double> fraction, std::optional<double> threshold) {
        SplitPolicy p;
        p.fraction_easy = fraction;
        p.threshold = threshold;
        return difficulty_split(ids, scores, p);
      },
      py::arg("image_ids"), py::arg("scores"), py::arg("fraction_easy") = py::none(),
      py::arg("threshold") = py::none());

  // trade-off harness ----------------------------------------------------------
  py::class_<TradeoffPoint>(m, "TradeoffPoint")
      .def(py::init([](double f, SplitMode s, double map, std::optional<double> map_std,
                       double det, double pred) {
             return TradeoffPoint{f, s, map, map_std, det, pred, det + pred};
           }),
           py::arg("fraction_easy"), py::arg("strategy"), py::arg("map"),
           py::arg("map_std") = py::none(), py::arg("detection_time_s") = 0.0,
           py::arg("predictor_time_s") = 0.0)
      .def_readonly("fraction_easy", &TradeoffPoint::fraction_easy)
      .def_readonly("strategy", &TradeoffPoint::strategy)
      .def_readonly("map", &TradeoffPoint::map)
      .def_readonly("map_std", &TradeoffPoint::map_std)
      .def_readonly("detection_time_s", &TradeoffPoint::detection_time_s)
      .def_readonly("predictor_time_s", &TradeoffPoint::predictor_time_s)
      .def_readonly("total_time_s", &TradeoffPoint::total_time_s);

  py::class_<HarnessConfig>(m, "HarnessConfig")
      .def(py::init<>())
      .def_readwrite("fractions", &HarnessConfig::fractions)
      .def_readwrite("repeats", &HarnessConfig::repeats)
      .def_readwrite("seed", &HarnessConfig::seed)
      .def_readwrite("predictor_cost_s", &HarnessConfig::predictor_cost_s)
      .def_readwrite("charge_predictor_always", &HarnessConfig::charge_predictor_always)
      .def_readwrite("eval", &HarnessConfig::eval);

  m.def(
      "evaluate_split",
      [](const Dataset& ds, const DetectorRun& fast, const DetectorRun& slow, const Assignment& a,
         double cost, const EvalConfig& eval) {
        return evaluate_split(ds, fast, slow, a, cost, eval).point;
      },
      py::arg("dataset"), py::arg("fast"), py::arg("slow"), py::arg("assignment"),
      py::arg("predictor_cost_s") = 0.05, py::arg("eval") = EvalConfig{});
  m.def(
      "sweep",
      [](const Dataset& ds, const DetectorRun& fast, const DetectorRun& slow,
         const std::vector<DifficultyScore>& scores, const HarnessConfig& cfg) {
        return sweep(ds, fast, slow, scores, cfg);
      },
      py::arg("dataset"), py::arg("fast"), py::arg("slow"), py::arg("difficulty_scores"),
      py::arg("config") = HarnessConfig{});
  m.def(
      "render_report",
      [](const std::vector<TradeoffPoint>& pts, const std::string& format, const std::string& fast,
         const std::string& slow) {
        return render_report(pts, parse_report_format(format), {fast, slow});
      },
      py::arg("points"), py::arg("format") = "markdown", py::arg("fast_name") = "fast",
      py::arg("slow_name") = "slow");
  m.def(
      "compare_strategies",
      [](const std::vector<TradeoffPoint>& pts) {
        std::vector<std::pair<double, double>> out;
        for (const auto& d : compare_strategies(pts)) out.emplace_back(d.fraction_easy, d.delta);
        return out;
      },
      py::arg("points"));
}
