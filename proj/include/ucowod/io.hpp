// Copyright 2026 The ucowod Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "ucowod/harness.hpp"
#include "ucowod/metrics.hpp"
#include "ucowod/types.hpp"

namespace ucowod {

/// A file could not be opened, read or written.
class FileError : public Error {
 public:
  using Error::Error;
};

/// A file parsed but violates its schema. The message names the first
/// offending record.
class SchemaError : public Error {
 public:
  using Error::Error;
};

struct GroundTruthFile {
  int known_count = 0;
  int unknown_slots = 0;
  std::vector<GroundTruthObject> annotations;
};

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Ground truth:  { "known_count", "unknown_slots",
//                  "annotations": [ { "image_id", "class_id", "bbox": [cx,cy,w,h] } ] }
GroundTruthFile parse_ground_truth(const nlohmann::json& j);
GroundTruthFile read_ground_truth(const std::filesystem::path& path);
nlohmann::json ground_truth_to_json(const GroundTruthFile& gt);

// Detections: JSON Lines, one { "image_id", "class_id", "bbox", "score" } per line.
std::vector<Detection> parse_detections(std::istream& in, int known_count, int unknown_slots);
std::vector<Detection> read_detections(const std::filesystem::path& path, int known_count,
                                       int unknown_slots);
std::string detections_to_jsonl(std::span<const Detection> dets);

/// Report with every real metric rounded to 6 decimal places.
nlohmann::json report_to_json(const EvalReport& report, const EvalConfig& cfg);
std::string report_to_string(const EvalReport& report, const EvalConfig& cfg);

/// Applies the keys present in `j` on top of `base`. Unknown keys are a
/// schema error.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json config_to_json(const RunConfig& cfg);

nlohmann::json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const nlohmann::json& j);

nlohmann::json head_to_json(const ToyHead& head);
ToyHead head_from_json(const nlohmann::json& j);

}  // namespace ucowod
