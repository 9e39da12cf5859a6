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

#include "easyhard/cli.hpp"

#include <charconv>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "easyhard/core_data.hpp"
#include "easyhard/difficulty.hpp"
#include "easyhard/router.hpp"
#include "easyhard/tradeoff.hpp"
#include "easyhard/voc_eval.hpp"

namespace easyhard {
namespace {

namespace fs = std::filesystem;

// Options shared by the evaluating subcommands.
struct EvalOptions {
  std::string ap_mode = "continuous";
  double iou_threshold = 0.5;
  std::string difficult = "ignore";
  std::optional<double> score_threshold;

  EvalConfig to_config() const {
    EvalConfig c;
    c.ap_mode = parse_ap_mode(ap_mode);
    c.iou_threshold = iou_threshold;
    c.difficult = parse_difficult_policy(difficult);
    c.score_threshold = score_threshold;
    return c;
  }
};

void add_eval_options(CLI::App* cmd, EvalOptions& o) {
  cmd->add_option("--ap-mode", o.ap_mode, "AP interpolation: continuous or 11pt")
      ->check(CLI::IsMember({"continuous", "11pt"}))
      ->capture_default_str();
  cmd->add_option("--iou-threshold", o.iou_threshold, "IoU a match must strictly exceed")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--difficult", o.difficult,
                  "difficult-flagged ground truth: ignore or count")
      ->check(CLI::IsMember({"ignore", "count"}))
      ->capture_default_str();
  cmd->add_option("--score-threshold", o.score_threshold,
                  "drop detections scoring below this before matching");
}

// A latency flag holds either a constant number of seconds or a JSONL path.
LatencySource parse_latency(const std::string& text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec == std::errc() && ptr == end) return value;
  return fs::path(text);
}

struct RunOptions {
  std::string fast_run, slow_run;
  std::string fast_latency, slow_latency;
  std::string fast_name, slow_name;
};

void add_run_options(CLI::App* cmd, RunOptions& o, bool required) {
  auto* f = cmd->add_option("--fast-run", o.fast_run, "detections JSONL of the fast detector")
                ->check(CLI::ExistingFile);
  auto* s = cmd->add_option("--slow-run", o.slow_run, "detections JSONL of the slow detector")
                ->check(CLI::ExistingFile);
  auto* fl = cmd->add_option("--fast-latency", o.fast_latency,
                             "fast detector seconds per image, or a latency JSONL path");
  auto* sl = cmd->add_option("--slow-latency", o.slow_latency,
                             "slow detector seconds per image, or a latency JSONL path");
  cmd->add_option("--fast-name", o.fast_name, "display name of the fast detector");
  cmd->add_option("--slow-name", o.slow_name, "display name of the slow detector");
  if (required) {
    f->required();
    s->required();
    fl->required();
    sl->required();
  }
}

DetectorRun load_run(const std::string& path, const std::string& latency, const std::string& name) {
  if (latency.empty()) throw Error(fmt::format("no latency given for run \"{}\"", path));
  return load_detector_run(path, parse_latency(latency), name);
}

// Difficulty scores either read directly or predicted from model + features.
struct ScoreOptions {
  std::string difficulty;
  std::string model;
  std::string features;
};

void add_score_options(CLI::App* cmd, ScoreOptions& o) {
  auto* d = cmd->add_option("--difficulty", o.difficulty, "difficulty scores JSONL")
                ->check(CLI::ExistingFile);
  auto* m = cmd->add_option("--model", o.model, "difficulty model JSON")->check(CLI::ExistingFile);
  auto* f = cmd->add_option("--features", o.features, "features JSONL")->check(CLI::ExistingFile);
  d->excludes(m);
  d->excludes(f);
  m->needs(f);
  f->needs(m);
}

std::vector<DifficultyScore> load_scores(const ScoreOptions& o) {
  if (!o.difficulty.empty()) return load_difficulty(o.difficulty);
  if (!o.model.empty()) return predict_difficulty(load_model(o.model), load_features(o.features));
  return {};
}

void emit(const std::string& text, const std::string& output, std::ostream& out) {
  if (output.empty() || output == "-") {
    out << text;
  } else {
    write_text_file(output, text);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Easy-versus-hard routing between a fast and a slow object detector"};
  app.name("easyhard");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.allow_config_extras(false);

  // validate ---------------------------------------------------------------
  auto* validate = app.add_subcommand("validate", "check input files and cross-references");
  std::string v_dataset, v_features, v_difficulty;
  RunOptions v_runs;
  validate->add_option("--dataset", v_dataset, "ground truth JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  add_run_options(validate, v_runs, false);
  validate->add_option("--features", v_features, "features JSONL")->check(CLI::ExistingFile);
  validate->add_option("--difficulty", v_difficulty, "difficulty scores JSONL")
      ->check(CLI::ExistingFile);

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "VOC-style mAP of one detector run");
  std::string e_run, e_dataset, e_output, e_format = "json";
  EvalOptions e_opts;
  eval->add_option("--run", e_run, "detections JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--dataset", e_dataset, "ground truth JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--output", e_output, "write the report here instead of stdout");
  eval->add_option("--format", e_format, "report format (json)")
      ->check(CLI::IsMember({"json"}))
      ->capture_default_str();
  add_eval_options(eval, e_opts);

  // train-difficulty -------------------------------------------------------
  auto* train = app.add_subcommand("train-difficulty", "fit the linear nu-SVR difficulty model");
  std::string t_features, t_targets, t_model;
  SvrConfig t_svr;
  train->add_option("--features", t_features, "training features JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--targets", t_targets, "ground-truth difficulty JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--model", t_model, "output model JSON")->required();
  train->add_option("--nu", t_svr.nu, "nu in (0, 1]")->capture_default_str();
  train->add_option("--c", t_svr.c, "regularization trade-off C")->capture_default_str();
  train->add_option("--tolerance", t_svr.tolerance, "KKT tolerance")->capture_default_str();
  train->add_option("--max-iterations", t_svr.max_iterations, "solver iteration cap")
      ->capture_default_str();

  // predict ----------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "score images with a trained difficulty model");
  std::string p_model, p_features, p_output;
  predict->add_option("--model", p_model, "model JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--features", p_features, "features JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--output", p_output, "difficulty JSONL (default stdout)");

  // route ------------------------------------------------------------------
  auto* route_cmd = app.add_subcommand("route", "split images into easy and hard");
  std::string r_dataset, r_mode = "difficulty", r_output;
  std::optional<double> r_fraction, r_threshold;
  std::uint64_t r_seed = 0;
  ScoreOptions r_scores;
  route_cmd->add_option("--dataset", r_dataset, "ground truth JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  route_cmd->add_option("--mode", r_mode, "difficulty or random")
      ->check(CLI::IsMember({"difficulty", "random"}))
      ->capture_default_str();
  auto* r_frac_opt =
      route_cmd->add_option("--fraction", r_fraction, "fraction of images routed to the fast detector")
          ->check(CLI::Range(0.0, 1.0));
  auto* r_thr_opt = route_cmd->add_option("--threshold", r_threshold,
                                          "explicit difficulty threshold (easy iff score <= t)");
  r_frac_opt->excludes(r_thr_opt);
  route_cmd->add_option("--seed", r_seed, "random-mode seed")->capture_default_str();
  add_score_options(route_cmd, r_scores);
  route_cmd->add_option("--output", r_output, "assignment JSONL (default stdout)");

  // sweep ------------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "accuracy/latency table over split fractions");
  std::string s_dataset, s_output_dir, s_format = "markdown";
  RunOptions s_runs;
  ScoreOptions s_scores;
  HarnessConfig s_cfg;
  EvalOptions s_eval;
  sweep_cmd->add_option("--dataset", s_dataset, "ground truth JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  add_run_options(sweep_cmd, s_runs, true);
  add_score_options(sweep_cmd, s_scores);
  sweep_cmd->add_option("--fractions", s_cfg.fractions, "easy fractions to evaluate")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sweep_cmd->add_option("--repeats", s_cfg.repeats, "random-split repeats")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sweep_cmd->add_option("--seed", s_cfg.seed, "base seed of the random splits")
      ->capture_default_str();
  sweep_cmd->add_option("--predictor-cost", s_cfg.predictor_cost_s,
                        "difficulty predictor seconds per image")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sweep_cmd->add_flag("--charge-predictor-always", s_cfg.charge_predictor_always,
                      "also charge the predictor at the 0% and 100% splits");
  add_eval_options(sweep_cmd, s_eval);
  sweep_cmd->add_option("--output-dir", s_output_dir, "directory for tradeoff.csv and tradeoff.md")
      ->required();
  sweep_cmd->add_option("--format", s_format, "stdout rendering: csv or markdown")
      ->check(CLI::IsMember({"csv", "markdown"}))
      ->capture_default_str();

  // report -----------------------------------------------------------------
  auto* report = app.add_subcommand("report", "render a sweep CSV");
  std::string rep_points, rep_format = "markdown", rep_fast = "fast", rep_slow = "slow";
  bool rep_compare = false;
  report->add_option("--points", rep_points, "CSV written by sweep")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--format", rep_format, "csv or markdown")
      ->check(CLI::IsMember({"csv", "markdown"}))
      ->capture_default_str();
  report->add_option("--fast-name", rep_fast, "display name of the fast detector")
      ->capture_default_str();
  report->add_option("--slow-name", rep_slow, "display name of the slow detector")
      ->capture_default_str();
  report->add_flag("--compare", rep_compare, "append difficulty-minus-random mAP deltas");

  std::vector<const char*> argv{"easyhard"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (validate->parsed()) {
      const Dataset dataset = load_dataset(v_dataset);
      std::size_t objects = 0;
      for (const auto& img : dataset.images()) objects += img.objects.size();
      out << fmt::format("dataset: {} images, {} objects\n", dataset.size(), objects);
      bool ok = true;
      auto check_run = [&](const std::string& path, const std::string& latency,
                           const std::string& name) {
        if (path.empty()) return;
        const DetectorRun run = latency.empty() ? load_detector_run(path, 0.0, name)
                                                : load_run(path, latency, name);
        out << fmt::format("run {}: {} detections\n", run.detector_id(), run.detection_count());
        for (const auto& id : unresolved_image_ids(run, dataset)) {
          err << fmt::format("run {}: detections for unknown image \"{}\"\n", run.detector_id(), id);
          ok = false;
        }
        if (!latency.empty()) {
          try {
            run.check_covers(dataset);
          } catch (const Error& e) {
            err << e.what() << '\n';
            ok = false;
          }
        }
      };
      check_run(v_runs.fast_run, v_runs.fast_latency, v_runs.fast_name);
      check_run(v_runs.slow_run, v_runs.slow_latency, v_runs.slow_name);
      auto check_ids = [&](std::string_view what, const std::vector<ImageId>& ids) {
        for (const auto& id : ids) {
          if (!dataset.contains(id)) {
            err << fmt::format("{}: unknown image \"{}\"\n", what, id);
            ok = false;
          }
        }
      };
      if (!v_features.empty()) {
        const auto features = load_features(v_features);
        out << fmt::format("features: {} records, dim {}\n", features.size(),
                           features.empty() ? 0 : features.front().vector.size());
        std::vector<ImageId> ids;
        for (const auto& f : features) ids.push_back(f.image_id);
        check_ids("features", ids);
      }
      if (!v_difficulty.empty()) {
        const auto scores = load_difficulty(v_difficulty);
        out << fmt::format("difficulty: {} scores\n", scores.size());
        std::vector<ImageId> ids;
        for (const auto& s : scores) ids.push_back(s.image_id);
        check_ids("difficulty", ids);
      }
      return ok ? 0 : 1;
    }

    if (eval->parsed()) {
      const Dataset dataset = load_dataset(e_dataset);
      const auto dets = group_by_image(load_detections(e_run));
      const EvalReport rep = mean_average_precision(dets, dataset, e_opts.to_config());
      emit(to_json(rep) + "\n", e_output, out);
      return 0;
    }

    if (train->parsed()) {
      const auto features = load_features(t_features);
      const auto targets = load_difficulty(t_targets);
      const TrainingSet set = make_training_set(features, targets);
      const SvrSolution sol = solve_nu_svr(set.features, set.targets, t_svr);
      save_model(sol.model, t_model);
      const auto predicted = predict_difficulty(sol.model, features);
      std::vector<double> p;
      for (const auto& s : predicted) p.push_back(s.score);
      const auto tau = kendall_tau(p, set.targets);
      out << fmt::format("trained on {} samples (dim {}) in {} iterations; epsilon {:.6g}\n",
                         set.targets.size(), sol.model.dim(), sol.iterations, sol.epsilon);
      out << (tau ? fmt::format("training kendall tau: {:.4f}\n", *tau)
                  : std::string("training kendall tau: undefined (constant predictions)\n"));
      return 0;
    }

    if (predict->parsed()) {
      const DifficultyModel model = load_model(p_model);
      emit(serialize_difficulty(predict_difficulty(model, load_features(p_features))), p_output,
           out);
      return 0;
    }

    if (route_cmd->parsed()) {
      const Dataset dataset = load_dataset(r_dataset);
      const auto ids = dataset.image_ids();
      Assignment a;
      if (r_mode == "random") {
        if (!r_fraction) throw Error("random routing needs --fraction");
        a = random_split(ids, *r_fraction, r_seed);
      } else {
        const auto scores = load_scores(r_scores);
        if (scores.empty()) throw Error("difficulty routing needs --difficulty or --model/--features");
        SplitPolicy policy;
        policy.fraction_easy = r_fraction;
        policy.threshold = r_threshold;
        a = difficulty_split(ids, scores, policy);
      }
      emit(serialize_assignment(a), r_output, out);
      return 0;
    }

    if (sweep_cmd->parsed()) {
      const Dataset dataset = load_dataset(s_dataset);
      const DetectorRun fast = load_run(s_runs.fast_run, s_runs.fast_latency, s_runs.fast_name);
      const DetectorRun slow = load_run(s_runs.slow_run, s_runs.slow_latency, s_runs.slow_name);
      const auto scores = load_scores(s_scores);
      s_cfg.eval = s_eval.to_config();
      const auto points = sweep(dataset, fast, slow, scores, s_cfg);
      const ReportLabels labels{fast.detector_id(), slow.detector_id()};
      fs::create_directories(s_output_dir);
      const std::string csv = render_report(points, ReportFormat::kCsv, labels);
      const std::string md = render_report(points, ReportFormat::kMarkdown, labels);
      write_text_file(fs::path(s_output_dir) / "tradeoff.csv", csv);
      write_text_file(fs::path(s_output_dir) / "tradeoff.md", md);
      out << (s_format == "csv" ? csv : md);
      return 0;
    }

    if (report->parsed()) {
      const auto points = parse_points_csv(read_text_file(rep_points), rep_points);
      out << render_report(points, parse_report_format(rep_format), {rep_fast, rep_slow});
      if (rep_compare) {
        out << "\n";
        for (const auto& d : compare_strategies(points)) {
          out << fmt::format("{}: {:+.4f}\n", split_label(d.fraction_easy), d.delta);
        }
      }
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace easyhard
