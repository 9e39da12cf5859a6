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

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace easyhard {

// Raised for every contract violation in inputs: malformed files, broken
// invariants, missing coverage. The message is meant for end users.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ImageId = std::string;

// Corner-based box in continuous pixel coordinates. There is no +1 pixel
// convention: width is x_max - x_min.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  bool operator==(const BoundingBox&) const = default;
};

// Throws Error unless coordinates are finite and x_min < x_max, y_min < y_max.
void validate_box(const BoundingBox& box);

struct GroundTruthObject {
  std::string class_label;
  BoundingBox box;
  bool difficult = false;

  bool operator==(const GroundTruthObject&) const = default;
};

struct ImageRecord {
  ImageId image_id;
  int width = 0;
  int height = 0;
  std::vector<GroundTruthObject> objects;

  bool operator==(const ImageRecord&) const = default;
};

struct Detection {
  ImageId image_id;
  std::string class_label;
  double score = 0.0;
  BoundingBox box;

  bool operator==(const Detection&) const = default;
};

using DetectionsByImage = std::map<ImageId, std::vector<Detection>>;

// Ordered ground truth with an id index. Immutable after construction.
class Dataset {
 public:
  Dataset() = default;
  // Validates id uniqueness and box placement.
  explicit Dataset(std::vector<ImageRecord> images);

  const std::vector<ImageRecord>& images() const { return images_; }
  std::size_t size() const { return images_.size(); }
  bool empty() const { return images_.empty(); }
  bool contains(const ImageId& id) const { return index_.contains(id); }
  const ImageRecord& at(const ImageId& id) const;
  std::vector<ImageId> image_ids() const;

 private:
  std::vector<ImageRecord> images_;
  std::unordered_map<ImageId, std::size_t> index_;
};

// Cached output of one black-box detector.
//
// Latency is either one constant applied to every image or a per-image
// table. Images with no detections simply have no entry in `detections`.
class DetectorRun {
 public:
  DetectorRun() = default;
  DetectorRun(std::string detector_id, DetectionsByImage detections,
              double constant_latency_s);
  DetectorRun(std::string detector_id, DetectionsByImage detections,
              std::map<ImageId, double> latency_s);

  const std::string& detector_id() const { return detector_id_; }
  const DetectionsByImage& detections() const { return detections_; }
  // Empty list for images without detections.
  const std::vector<Detection>& detections_for(const ImageId& id) const;
  std::size_t detection_count() const;

  bool has_latency(const ImageId& id) const;
  // Throws Error when the image has no latency entry.
  double latency_for(const ImageId& id) const;
  std::optional<double> constant_latency() const;

  // Throws Error naming the first dataset image without a latency.
  void check_covers(const Dataset& dataset) const;

 private:
  std::string detector_id_;
  DetectionsByImage detections_;
  std::variant<double, std::map<ImageId, double>> latency_;
};

struct FeatureRecord {
  ImageId image_id;
  std::vector<double> vector;

  bool operator==(const FeatureRecord&) const = default;
};

struct DifficultyScore {
  ImageId image_id;
  double score = 0.0;

  bool operator==(const DifficultyScore&) const = default;
};

struct LatencyRecord {
  ImageId image_id;
  double seconds = 0.0;
};

// Where a run's per-image latency comes from.
using LatencySource = std::variant<double, std::filesystem::path>;

std::vector<ImageRecord> load_dataset_records(const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
std::vector<Detection> load_detections(const std::filesystem::path& path);
std::vector<LatencyRecord> load_latencies(const std::filesystem::path& path);
DetectorRun load_detector_run(const std::filesystem::path& path,
                              const LatencySource& latency_source,
                              std::string detector_id = {});
std::vector<FeatureRecord> load_features(const std::filesystem::path& path);
std::vector<DifficultyScore> load_difficulty(const std::filesystem::path& path);

// Same parsers over in-memory JSONL text; `origin` only labels errors.
std::vector<ImageRecord> parse_dataset(std::string_view text,
                                       std::string_view origin = "<memory>");
std::vector<Detection> parse_detections(std::string_view text,
                                        std::string_view origin = "<memory>");
std::vector<LatencyRecord> parse_latencies(std::string_view text,
                                           std::string_view origin = "<memory>");
std::vector<FeatureRecord> parse_features(std::string_view text,
                                          std::string_view origin = "<memory>");
std::vector<DifficultyScore> parse_difficulty(std::string_view text,
                                              std::string_view origin = "<memory>");

// Canonical JSONL: fixed field order, shortest round-trip number formatting,
// one record per line with a trailing newline.
std::string serialize_dataset(const std::vector<ImageRecord>& images);
std::string serialize_detections(const std::vector<Detection>& detections);
std::string serialize_latencies(const std::vector<LatencyRecord>& latencies);
std::string serialize_features(const std::vector<FeatureRecord>& features);
std::string serialize_difficulty(const std::vector<DifficultyScore>& scores);

// Flattens a run back into file order: images by id, detections in list order.
std::vector<Detection> flatten(const DetectionsByImage& detections);
DetectionsByImage group_by_image(const std::vector<Detection>& detections);

// Detection image ids absent from the dataset, sorted and deduplicated.
std::vector<ImageId> unresolved_image_ids(const DetectorRun& run,
                                          const Dataset& dataset);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace easyhard
