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

#include "easyhard/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace easyhard {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Location of the record being parsed, for error messages.
struct LineRef {
  std::string_view origin;
  std::size_t line = 0;

  [[noreturn]] void fail(std::string_view what) const {
    throw Error(fmt::format("{}:{}: {}", origin, line, what));
  }
};

// Calls `fn(record, ref)` for every non-blank, non-comment line.
template <typename Fn>
void for_each_record(std::string_view text, std::string_view origin, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') {
      if (end == text.size()) break;
      continue;
    }
    const LineRef ref{origin, line_no};
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      ref.fail(fmt::format("malformed JSON: {}", e.what()));
    }
    if (!record.is_object()) ref.fail("expected a JSON object");
    fn(record, ref);
    if (end == text.size()) break;
  }
}

const json& field(const json& record, const char* key, const LineRef& ref) {
  const auto it = record.find(key);
  if (it == record.end()) ref.fail(fmt::format("missing field \"{}\"", key));
  return *it;
}

std::string string_field(const json& record, const char* key, const LineRef& ref) {
  const json& v = field(record, key, ref);
  if (!v.is_string()) ref.fail(fmt::format("field \"{}\" must be a string", key));
  auto s = v.get<std::string>();
  if (s.empty()) ref.fail(fmt::format("field \"{}\" must be non-empty", key));
  return s;
}

double number_value(const json& v, std::string_view what, const LineRef& ref) {
  if (!v.is_number()) ref.fail(fmt::format("{} must be a number", what));
  const double x = v.get<double>();
  if (!std::isfinite(x)) ref.fail(fmt::format("{} must be finite", what));
  return x;
}

double number_field(const json& record, const char* key, const LineRef& ref) {
  return number_value(field(record, key, ref), fmt::format("field \"{}\"", key), ref);
}

int positive_int_field(const json& record, const char* key, const LineRef& ref) {
  const json& v = field(record, key, ref);
  if (!v.is_number_integer() || v.get<long long>() <= 0 ||
      v.get<long long>() > std::numeric_limits<int>::max()) {
    ref.fail(fmt::format("field \"{}\" must be a positive integer", key));
  }
  return v.get<int>();
}

BoundingBox bbox_field(const json& record, const LineRef& ref) {
  const json& v = field(record, "bbox", ref);
  if (!v.is_array() || v.size() != 4) {
    ref.fail("field \"bbox\" must be [xmin, ymin, xmax, ymax]");
  }
  BoundingBox box{number_value(v[0], "bbox[0]", ref), number_value(v[1], "bbox[1]", ref),
                  number_value(v[2], "bbox[2]", ref), number_value(v[3], "bbox[3]", ref)};
  try {
    validate_box(box);
  } catch (const Error& e) {
    ref.fail(e.what());
  }
  return box;
}

ordered_json bbox_json(const BoundingBox& box) {
  return ordered_json::array({box.x_min, box.y_min, box.x_max, box.y_max});
}

template <typename T, typename ToJson>
std::string to_jsonl(const std::vector<T>& items, ToJson&& to_json) {
  std::string out;
  for (const auto& item : items) {
    out += to_json(item).dump();
    out += '\n';
  }
  return out;
}

}  // namespace

void validate_box(const BoundingBox& box) {
  if (!std::isfinite(box.x_min) || !std::isfinite(box.y_min) ||
      !std::isfinite(box.x_max) || !std::isfinite(box.y_max)) {
    throw Error("box coordinates must be finite");
  }
  if (!(box.x_min < box.x_max) || !(box.y_min < box.y_max)) {
    throw Error(fmt::format("degenerate box [{}, {}, {}, {}]", box.x_min, box.y_min,
                            box.x_max, box.y_max));
  }
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<ImageRecord> images) : images_(std::move(images)) {
  index_.reserve(images_.size());
  for (std::size_t i = 0; i < images_.size(); ++i) {
    const ImageRecord& img = images_[i];
    if (img.image_id.empty()) throw Error("empty image_id");
    if (img.width <= 0 || img.height <= 0) {
      throw Error(fmt::format("image \"{}\": width and height must be positive",
                              img.image_id));
    }
    for (const auto& obj : img.objects) {
      if (obj.class_label.empty()) {
        throw Error(fmt::format("image \"{}\": empty class label", img.image_id));
      }
      validate_box(obj.box);
      if (obj.box.x_min < 0 || obj.box.y_min < 0 || obj.box.x_max > img.width ||
          obj.box.y_max > img.height) {
        throw Error(fmt::format("image \"{}\": box outside [0,{}]x[0,{}]", img.image_id,
                                img.width, img.height));
      }
    }
    if (!index_.emplace(img.image_id, i).second) {
      throw Error(fmt::format("duplicate image_id \"{}\"", img.image_id));
    }
  }
}

const ImageRecord& Dataset::at(const ImageId& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw Error(fmt::format("unknown image_id \"{}\"", id));
  return images_[it->second];
}

std::vector<ImageId> Dataset::image_ids() const {
  std::vector<ImageId> ids;
  ids.reserve(images_.size());
  for (const auto& img : images_) ids.push_back(img.image_id);
  return ids;
}

// ---------------------------------------------------------------------------
// DetectorRun

namespace {

void check_detection_keys(const DetectionsByImage& detections) {
  for (const auto& [id, dets] : detections) {
    for (const auto& d : dets) {
      if (d.image_id != id) {
        throw Error(fmt::format("detection for \"{}\" filed under \"{}\"", d.image_id, id));
      }
      if (!std::isfinite(d.score)) {
        throw Error(fmt::format("image \"{}\": non-finite detection score", id));
      }
      validate_box(d.box);
    }
  }
}

void check_latency(double seconds, std::string_view what) {
  if (!std::isfinite(seconds) || seconds < 0.0) {
    throw Error(fmt::format("{}: latency must be a non-negative finite number, got {}",
                            what, seconds));
  }
}

}  // namespace

DetectorRun::DetectorRun(std::string detector_id, DetectionsByImage detections,
                         double constant_latency_s)
    : detector_id_(std::move(detector_id)),
      detections_(std::move(detections)),
      latency_(constant_latency_s) {
  check_detection_keys(detections_);
  check_latency(constant_latency_s, "constant latency");
}

DetectorRun::DetectorRun(std::string detector_id, DetectionsByImage detections,
                         std::map<ImageId, double> latency_s)
    : detector_id_(std::move(detector_id)), detections_(std::move(detections)) {
  check_detection_keys(detections_);
  for (const auto& [id, s] : latency_s) check_latency(s, fmt::format("image \"{}\"", id));
  for (const auto& [id, dets] : detections_) {
    if (!latency_s.contains(id)) {
      throw Error(fmt::format("image \"{}\" has detections but no latency", id));
    }
  }
  latency_ = std::move(latency_s);
}

const std::vector<Detection>& DetectorRun::detections_for(const ImageId& id) const {
  static const std::vector<Detection> kEmpty;
  const auto it = detections_.find(id);
  return it == detections_.end() ? kEmpty : it->second;
}

std::size_t DetectorRun::detection_count() const {
  std::size_t n = 0;
  for (const auto& [id, dets] : detections_) n += dets.size();
  return n;
}

bool DetectorRun::has_latency(const ImageId& id) const {
  if (std::holds_alternative<double>(latency_)) return true;
  return std::get<std::map<ImageId, double>>(latency_).contains(id);
}

double DetectorRun::latency_for(const ImageId& id) const {
  if (const auto* c = std::get_if<double>(&latency_)) return *c;
  const auto& table = std::get<std::map<ImageId, double>>(latency_);
  const auto it = table.find(id);
  if (it == table.end()) {
    throw Error(fmt::format("detector \"{}\": no latency for image \"{}\"", detector_id_, id));
  }
  return it->second;
}

std::optional<double> DetectorRun::constant_latency() const {
  if (const auto* c = std::get_if<double>(&latency_)) return *c;
  return std::nullopt;
}

void DetectorRun::check_covers(const Dataset& dataset) const {
  for (const auto& img : dataset.images()) {
    if (!has_latency(img.image_id)) {
      throw Error(fmt::format("detector \"{}\": no latency for image \"{}\"", detector_id_,
                              img.image_id));
    }
  }
}

// ---------------------------------------------------------------------------
// Parsing

std::vector<ImageRecord> parse_dataset(std::string_view text, std::string_view origin) {
  std::vector<ImageRecord> images;
  std::set<ImageId> seen;
  for_each_record(text, origin, [&](const json& r, const LineRef& ref) {
    ImageRecord img;
    img.image_id = string_field(r, "image_id", ref);
    img.width = positive_int_field(r, "width", ref);
    img.height = positive_int_field(r, "height", ref);
    if (!seen.insert(img.image_id).second) {
      ref.fail(fmt::format("duplicate image_id \"{}\"", img.image_id));
    }
    const json& objects = field(r, "objects", ref);
    if (!objects.is_array()) ref.fail("field \"objects\" must be an array");
    for (const json& o : objects) {
      if (!o.is_object()) ref.fail("each object must be a JSON object");
      GroundTruthObject obj;
      obj.class_label = string_field(o, "class", ref);
      obj.box = bbox_field(o, ref);
      const auto d = o.find("difficult");
      if (d != o.end()) {
        if (!d->is_boolean()) ref.fail("field \"difficult\" must be a boolean");
        obj.difficult = d->get<bool>();
      }
      if (obj.box.x_min < 0 || obj.box.y_min < 0 || obj.box.x_max > img.width ||
          obj.box.y_max > img.height) {
        ref.fail(fmt::format("box outside image bounds [0,{}]x[0,{}]", img.width, img.height));
      }
      img.objects.push_back(std::move(obj));
    }
    images.push_back(std::move(img));
  });
  return images;
}

std::vector<Detection> parse_detections(std::string_view text, std::string_view origin) {
  std::vector<Detection> dets;
  for_each_record(text, origin, [&](const json& r, const LineRef& ref) {
    Detection d;
    d.image_id = string_field(r, "image_id", ref);
    d.class_label = string_field(r, "class", ref);
    d.score = number_field(r, "score", ref);
    d.box = bbox_field(r, ref);
    dets.push_back(std::move(d));
  });
  return dets;
}

std::vector<LatencyRecord> parse_latencies(std::string_view text, std::string_view origin) {
  std::vector<LatencyRecord> out;
  std::set<ImageId> seen;
  for_each_record(text, origin, [&](const json& r, const LineRef& ref) {
    LatencyRecord rec;
    rec.image_id = string_field(r, "image_id", ref);
    rec.seconds = number_field(r, "seconds", ref);
    if (rec.seconds < 0.0) ref.fail(fmt::format("negative latency {}", rec.seconds));
    if (!seen.insert(rec.image_id).second) {
      ref.fail(fmt::format("duplicate latency for \"{}\"", rec.image_id));
    }
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<FeatureRecord> parse_features(std::string_view text, std::string_view origin) {
  std::vector<FeatureRecord> out;
  std::set<ImageId> seen;
  for_each_record(text, origin, [&](const json& r, const LineRef& ref) {
    FeatureRecord rec;
    rec.image_id = string_field(r, "image_id", ref);
    const json& v = field(r, "vector", ref);
    if (!v.is_array() || v.empty()) ref.fail("field \"vector\" must be a non-empty array");
    rec.vector.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      rec.vector.push_back(number_value(v[i], fmt::format("vector[{}]", i), ref));
    }
    if (!out.empty() && out.front().vector.size() != rec.vector.size()) {
      ref.fail(fmt::format("dimension mismatch: expected {}, got {}",
                           out.front().vector.size(), rec.vector.size()));
    }
    if (!seen.insert(rec.image_id).second) {
      ref.fail(fmt::format("duplicate image_id \"{}\"", rec.image_id));
    }
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<DifficultyScore> parse_difficulty(std::string_view text, std::string_view origin) {
  std::vector<DifficultyScore> out;
  std::set<ImageId> seen;
  for_each_record(text, origin, [&](const json& r, const LineRef& ref) {
    DifficultyScore s;
    s.image_id = string_field(r, "image_id", ref);
    s.score = number_field(r, "score", ref);
    if (!seen.insert(s.image_id).second) {
      ref.fail(fmt::format("duplicate image_id \"{}\"", s.image_id));
    }
    out.push_back(std::move(s));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Files

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open \"{}\"", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write \"{}\"", path.string()));
  out << text;
  if (!out) throw Error(fmt::format("write failed for \"{}\"", path.string()));
}

std::vector<ImageRecord> load_dataset_records(const std::filesystem::path& path) {
  return parse_dataset(read_text_file(path), path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  return Dataset(load_dataset_records(path));
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
  return parse_detections(read_text_file(path), path.string());
}

std::vector<LatencyRecord> load_latencies(const std::filesystem::path& path) {
  return parse_latencies(read_text_file(path), path.string());
}

DetectorRun load_detector_run(const std::filesystem::path& path,
                              const LatencySource& latency_source, std::string detector_id) {
  if (detector_id.empty()) detector_id = path.stem().string();
  auto grouped = group_by_image(load_detections(path));
  if (const auto* constant = std::get_if<double>(&latency_source)) {
    return DetectorRun(std::move(detector_id), std::move(grouped), *constant);
  }
  std::map<ImageId, double> table;
  for (auto& rec : load_latencies(std::get<std::filesystem::path>(latency_source))) {
    table.emplace(std::move(rec.image_id), rec.seconds);
  }
  return DetectorRun(std::move(detector_id), std::move(grouped), std::move(table));
}

std::vector<FeatureRecord> load_features(const std::filesystem::path& path) {
  return parse_features(read_text_file(path), path.string());
}

std::vector<DifficultyScore> load_difficulty(const std::filesystem::path& path) {
  return parse_difficulty(read_text_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize_dataset(const std::vector<ImageRecord>& images) {
  return to_jsonl(images, [](const ImageRecord& img) {
    ordered_json objects = ordered_json::array();
    for (const auto& o : img.objects) {
      ordered_json j;
      j["class"] = o.class_label;
      j["bbox"] = bbox_json(o.box);
      j["difficult"] = o.difficult;
      objects.push_back(std::move(j));
    }
    ordered_json j;
    j["image_id"] = img.image_id;
    j["width"] = img.width;
    j["height"] = img.height;
    j["objects"] = std::move(objects);
    return j;
  });
}

std::string serialize_detections(const std::vector<Detection>& detections) {
  return to_jsonl(detections, [](const Detection& d) {
    ordered_json j;
    j["image_id"] = d.image_id;
    j["class"] = d.class_label;
    j["score"] = d.score;
    j["bbox"] = bbox_json(d.box);
    return j;
  });
}

std::string serialize_latencies(const std::vector<LatencyRecord>& latencies) {
  return to_jsonl(latencies, [](const LatencyRecord& l) {
    ordered_json j;
    j["image_id"] = l.image_id;
    j["seconds"] = l.seconds;
    return j;
  });
}

std::string serialize_features(const std::vector<FeatureRecord>& features) {
  return to_jsonl(features, [](const FeatureRecord& f) {
    ordered_json j;
    j["image_id"] = f.image_id;
    j["vector"] = f.vector;
    return j;
  });
}

std::string serialize_difficulty(const std::vector<DifficultyScore>& scores) {
  return to_jsonl(scores, [](const DifficultyScore& s) {
    ordered_json j;
    j["image_id"] = s.image_id;
    j["score"] = s.score;
    return j;
  });
}

std::vector<Detection> flatten(const DetectionsByImage& detections) {
  std::vector<Detection> out;
  for (const auto& [id, dets] : detections) out.insert(out.end(), dets.begin(), dets.end());
  return out;
}

DetectionsByImage group_by_image(const std::vector<Detection>& detections) {
  DetectionsByImage grouped;
  for (const auto& d : detections) grouped[d.image_id].push_back(d);
  return grouped;
}

std::vector<ImageId> unresolved_image_ids(const DetectorRun& run, const Dataset& dataset) {
  std::vector<ImageId> missing;
  for (const auto& [id, dets] : run.detections()) {
    if (!dets.empty() && !dataset.contains(id)) missing.push_back(id);
  }
  return missing;  // map keys are already sorted and unique
}

}  // namespace easyhard
