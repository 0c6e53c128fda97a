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

#include "ucowod/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ucowod {

using nlohmann::json;

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing \"" + key + "\"");
  return *it;
}

std::int64_t integer(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer()) throw SchemaError(where + ": \"" + key + "\" must be an integer");
  return v.get<std::int64_t>();
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) throw SchemaError(where + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

Box parse_box(const json& obj, const std::string& where) {
  const json& b = field(obj, "bbox", where);
  if (!b.is_array() || b.size() != 4) throw SchemaError(where + ": \"bbox\" must be [cx, cy, w, h]");
  std::array<double, 4> v{};
  for (std::size_t k = 0; k < 4; ++k) {
    if (!b[k].is_number()) throw SchemaError(where + ": \"bbox\" entries must be numbers");
    v[k] = b[k].get<double>();
  }
  try {
    return Box::make(v[0], v[1], v[2], v[3]);
  } catch (const Error&) {
    throw SchemaError(where + ": \"bbox\" needs finite centre and positive width/height");
  }
}

json box_json(const Box& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index cols, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols) {
      throw SchemaError(where + ": row " + std::to_string(i) + " has the wrong width");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), k) = j[i][static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Eigen::MatrixXd matrix_from(const json& j, const std::string& where) {
  const Eigen::Index cols = j.is_array() && !j.empty() && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  return matrix_from(j, cols, where);
}

json vector_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write " + path.string());
  out << text;
  if (!out) throw FileError("failed while writing " + path.string());
}

GroundTruthFile parse_ground_truth(const json& j) {
  if (!j.is_object()) throw SchemaError("ground truth: top level must be an object");
  GroundTruthFile gt;
  const auto known = integer(j, "known_count", "ground truth");
  const auto slots = integer(j, "unknown_slots", "ground truth");
  if (known < 0 || slots < 0) throw SchemaError("ground truth: class counts must be non-negative");
  gt.known_count = static_cast<int>(known);
  gt.unknown_slots = static_cast<int>(slots);
  const json& anns = field(j, "annotations", "ground truth");
  if (!anns.is_array()) throw SchemaError("ground truth: \"annotations\" must be an array");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string where = "annotations[" + std::to_string(i) + "]";
    if (!anns[i].is_object()) throw SchemaError(where + ": record must be an object");
    const auto image = integer(anns[i], "image_id", where);
    const auto cls = integer(anns[i], "class_id", where);
    if (cls < 0) throw SchemaError(where + ": \"class_id\" must be non-negative");
    gt.annotations.push_back(GroundTruthObject{
        image, ClassLabel::from_id(static_cast<int>(cls), gt.known_count), parse_box(anns[i], where), false});
  }
  return gt;
}

GroundTruthFile read_ground_truth(const std::filesystem::path& path) {
  return parse_ground_truth(read_json(path));
}

json ground_truth_to_json(const GroundTruthFile& gt) {
  json anns = json::array();
  for (const auto& a : gt.annotations) {
    if (a.is_pseudo) continue;
    anns.push_back({{"image_id", a.image_id}, {"class_id", a.label.id()}, {"bbox", box_json(a.box)}});
  }
  return {{"known_count", gt.known_count}, {"unknown_slots", gt.unknown_slots}, {"annotations", anns}};
}

std::vector<Detection> parse_detections(std::istream& in, int known_count, int unknown_slots) {
  std::vector<Detection> out;
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      throw SchemaError(where + ": invalid JSON");
    }
    if (!rec.is_object()) throw SchemaError(where + ": record must be an object");
    const auto image = integer(rec, "image_id", where);
    const auto cls = integer(rec, "class_id", where);
    if (cls < 0 || cls >= known_count + unknown_slots) {
      throw SchemaError(where + ": \"class_id\" outside [0, known_count + unknown_slots)");
    }
    const double score = number(rec, "score", where);
    if (!(score >= 0.0 && score <= 1.0)) throw SchemaError(where + ": \"score\" outside [0,1]");
    out.push_back(Detection{image, ClassLabel::from_id(static_cast<int>(cls), known_count),
                            parse_box(rec, where), score});
  }
  return out;
}

std::vector<Detection> read_detections(const std::filesystem::path& path, int known_count,
                                       int unknown_slots) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  try {
    return parse_detections(in, known_count, unknown_slots);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::string detections_to_jsonl(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    if (d.label.is_background()) continue;
    const json rec = {{"image_id", d.image_id}, {"class_id", d.label.id()},
                      {"bbox", box_json(d.box)}, {"score", d.score}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

json report_to_json(const EvalReport& report, const EvalConfig& cfg) {
  json perm = json::object();
  for (const auto& [pred, gt] : report.permutation) {
    perm[std::to_string(pred)] = gt ? json(*gt) : json(nullptr);
  }
  json out = {
      {"map_known", round6(report.map_known)},
      {"wi", round6(report.wi)},
      {"a_ose", report.a_ose},
      {"uc_map", round6(report.uc_map)},
      {"uc_recall", round6(report.uc_recall)},
      {"permutation", perm},
      {"config_echo",
       {{"iou_thresh", round6(cfg.iou_threshold)},
        {"score_thresh", round6(cfg.score_threshold)},
        {"known_count", cfg.known_count},
        {"unknown_slots", cfg.unknown_slots}}},
  };
  if (!report.warnings.empty()) out["warnings"] = report.warnings;
  return out;
}

std::string report_to_string(const EvalReport& report, const EvalConfig& cfg) {
  return report_to_json(report, cfg).dump(2) + "\n";
}

RunConfig config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw SchemaError("config: top level must be an object");
  auto get = [](const json& obj, const std::string& key, auto& dst, const std::string& where) {
    try {
      dst = obj.at(key).get<std::remove_reference_t<decltype(dst)>>();
    } catch (const json::exception&) {
      throw SchemaError(where + ": bad value for \"" + key + "\"");
    }
  };
  for (const auto& [key, value] : j.items()) {
    const std::string w = "config";
    if (key == "seed") get(j, key, c.seed, w);
    else if (key == "known_count") get(j, key, c.known_count, w);
    else if (key == "unknown_classes") get(j, key, c.unknown_classes, w);
    else if (key == "unknown_slots") get(j, key, c.unknown_slots, w);
    else if (key == "semantic_dim") get(j, key, c.semantic_dim, w);
    else if (key == "train_scenes") get(j, key, c.train_scenes, w);
    else if (key == "test_scenes") get(j, key, c.test_scenes, w);
    else if (key == "known_per_scene") get(j, key, c.known_per_scene, w);
    else if (key == "unknown_per_scene") get(j, key, c.unknown_per_scene, w);
    else if (key == "negatives_per_scene") get(j, key, c.negatives_per_scene, w);
    else if (key == "jitter_per_object") get(j, key, c.jitter_per_object, w);
    else if (key == "feature_noise") get(j, key, c.feature_noise, w);
    else if (key == "prototype_separation") get(j, key, c.prototype_separation, w);
    else if (key == "image_size") get(j, key, c.image_size, w);
    else if (key == "grid") get(j, key, c.grid, w);
    else if (key == "hidden_dim") get(j, key, c.hidden_dim, w);
    else if (key == "epochs") get(j, key, c.epochs, w);
    else if (key == "warmup_fraction") get(j, key, c.warmup_fraction, w);
    else if (key == "learning_rate") get(j, key, c.learning_rate, w);
    else if (key == "cosine_decay") get(j, key, c.cosine_decay, w);
    else if (key == "roi_foreground_iou") get(j, key, c.roi_foreground_iou, w);
    else if (key == "lambda0") get(j, key, c.lambda0, w);
    else if (key == "eta") get(j, key, c.eta, w);
    else if (key == "refine_lr") get(j, key, c.refine_lr, w);
    else if (key == "refine_steps") get(j, key, c.refine_steps, w);
    else if (key == "refine_target_interval") get(j, key, c.refine_target_interval, w);
    else if (key == "refine_update_embeddings") get(j, key, c.refine_update_embeddings, w);
    else if (key == "refine_clusters") get(j, key, c.refine_clusters, w);
    else if (key == "refine_space") {
      const std::string v = value.is_string() ? value.get<std::string>() : "";
      if (v == "logits") c.refine_space = RunConfig::EmbeddingSpace::Logits;
      else if (v == "hidden") c.refine_space = RunConfig::EmbeddingSpace::Hidden;
      else throw SchemaError("config: \"refine_space\" must be \"logits\" or \"hidden\"");
    }
    else if (key == "detection_nms") get(j, key, c.detection_nms, w);
    else if (key == "iou_threshold") get(j, key, c.iou_threshold, w);
    else if (key == "score_threshold") get(j, key, c.score_threshold, w);
    else if (key == "ulp") {
      if (!value.is_object()) throw SchemaError("config: \"ulp\" must be an object");
      for (const auto& [k, v] : value.items()) {
        (void)v;
        if (k == "nms_threshold") get(value, k, c.ulp.nms_threshold, "config.ulp");
        else if (k == "top_k") get(value, k, c.ulp.top_k, "config.ulp");
        else if (k == "delta") get(value, k, c.ulp.delta, "config.ulp");
        else if (k == "known_overlap_threshold") get(value, k, c.ulp.known_overlap_threshold, "config.ulp");
        else throw SchemaError("config.ulp: unknown key \"" + k + "\"");
      }
    } else if (key == "weights") {
      if (!value.is_object()) throw SchemaError("config: \"weights\" must be an object");
      for (const auto& [k, v] : value.items()) {
        (void)v;
        if (k == "rpn") get(value, k, c.weights.rpn, "config.weights");
        else if (k == "cls") get(value, k, c.weights.cls, "config.weights");
        else if (k == "reg") get(value, k, c.weights.reg, "config.weights");
        else if (k == "sim") get(value, k, c.weights.sim, "config.weights");
        else throw SchemaError("config.weights: unknown key \"" + k + "\"");
      }
    } else if (key == "thresholds") {
      if (!value.is_object()) throw SchemaError("config: \"thresholds\" must be an object");
      for (const auto& [k, v] : value.items()) {
        (void)v;
        if (k == "th_intercept") get(value, k, c.thresholds.th_intercept, "config.thresholds");
        else if (k == "th_slope") get(value, k, c.thresholds.th_slope, "config.thresholds");
        else if (k == "tl_intercept") get(value, k, c.thresholds.tl_intercept, "config.thresholds");
        else if (k == "tl_slope") get(value, k, c.thresholds.tl_slope, "config.thresholds");
        else throw SchemaError("config.thresholds: unknown key \"" + k + "\"");
      }
    } else {
      throw SchemaError("config: unknown key \"" + key + "\"");
    }
  }
  try {
    c.validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(e.what());
  }
  return c;
}

json config_to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"known_count", c.known_count},
      {"unknown_classes", c.unknown_classes},
      {"unknown_slots", c.unknown_slots},
      {"semantic_dim", c.semantic_dim},
      {"train_scenes", c.train_scenes},
      {"test_scenes", c.test_scenes},
      {"known_per_scene", c.known_per_scene},
      {"unknown_per_scene", c.unknown_per_scene},
      {"negatives_per_scene", c.negatives_per_scene},
      {"jitter_per_object", c.jitter_per_object},
      {"feature_noise", c.feature_noise},
      {"prototype_separation", c.prototype_separation},
      {"image_size", c.image_size},
      {"grid", c.grid},
      {"hidden_dim", c.hidden_dim},
      {"epochs", c.epochs},
      {"warmup_fraction", c.warmup_fraction},
      {"learning_rate", c.learning_rate},
      {"cosine_decay", c.cosine_decay},
      {"roi_foreground_iou", c.roi_foreground_iou},
      {"lambda0", c.lambda0},
      {"eta", c.eta},
      {"refine_lr", c.refine_lr},
      {"refine_steps", c.refine_steps},
      {"refine_target_interval", c.refine_target_interval},
      {"refine_update_embeddings", c.refine_update_embeddings},
      {"refine_clusters", c.refine_clusters},
      {"refine_space", c.refine_space == RunConfig::EmbeddingSpace::Hidden ? "hidden" : "logits"},
      {"detection_nms", c.detection_nms},
      {"iou_threshold", c.iou_threshold},
      {"score_threshold", c.score_threshold},
      {"ulp",
       {{"nms_threshold", c.ulp.nms_threshold},
        {"top_k", c.ulp.top_k},
        {"delta", c.ulp.delta},
        {"known_overlap_threshold", c.ulp.known_overlap_threshold}}},
      {"weights", {{"rpn", c.weights.rpn}, {"cls", c.weights.cls}, {"reg", c.weights.reg}, {"sim", c.weights.sim}}},
      {"thresholds",
       {{"th_intercept", c.thresholds.th_intercept},
        {"th_slope", c.thresholds.th_slope},
        {"tl_intercept", c.thresholds.tl_intercept},
        {"tl_slope", c.thresholds.tl_slope}}},
  };
}

namespace {

json scene_json(const SyntheticScene& s) {
  json props = json::array();
  for (const auto& p : s.proposals) props.push_back({{"bbox", box_json(p.box)}, {"objectness", p.objectness}});
  json gts = json::array();
  for (const auto& g : s.gts) gts.push_back({{"class_id", g.label.id()}, {"bbox", box_json(g.box)}});
  return {{"image_id", s.image_id},
          {"proposals", props},
          {"features", matrix_json(s.features)},
          {"gts", gts},
          {"source_class", s.source_class}};
}

SyntheticScene scene_from(const json& j, int known_count, int feature_dim, const std::string& where) {
  SyntheticScene s;
  s.image_id = integer(j, "image_id", where);
  const json& props = field(j, "proposals", where);
  for (std::size_t i = 0; i < props.size(); ++i) {
    const std::string w = where + ".proposals[" + std::to_string(i) + "]";
    s.proposals.push_back(Proposal{s.image_id, parse_box(props[i], w), number(props[i], "objectness", w)});
  }
  s.features = matrix_from(field(j, "features", where), feature_dim, where + ".features");
  const json& gts = field(j, "gts", where);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const std::string w = where + ".gts[" + std::to_string(i) + "]";
    const auto cls = static_cast<int>(integer(gts[i], "class_id", w));
    s.gts.push_back(GroundTruthObject{s.image_id, ClassLabel::from_id(cls, known_count), parse_box(gts[i], w), false});
  }
  s.source_class = field(j, "source_class", where).get<std::vector<int>>();
  if (s.features.rows() != static_cast<Eigen::Index>(s.proposals.size()) ||
      s.source_class.size() != s.proposals.size()) {
    throw SchemaError(where + ": every proposal needs exactly one feature row");
  }
  return s;
}

}  // namespace

json dataset_to_json(const Dataset& data) {
  json train = json::array(), test = json::array();
  for (const auto& s : data.train) train.push_back(scene_json(s));
  for (const auto& s : data.test) test.push_back(scene_json(s));
  return {{"known_count", data.known_count},
          {"unknown_classes", data.unknown_classes},
          {"feature_dim", data.feature_dim},
          {"prototypes", matrix_json(data.prototypes)},
          {"train", train},
          {"test", test}};
}

Dataset dataset_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("dataset: top level must be an object");
  Dataset d;
  d.known_count = static_cast<int>(integer(j, "known_count", "dataset"));
  d.unknown_classes = static_cast<int>(integer(j, "unknown_classes", "dataset"));
  d.feature_dim = static_cast<int>(integer(j, "feature_dim", "dataset"));
  d.prototypes = matrix_from(field(j, "prototypes", "dataset"), "dataset.prototypes");
  const json& train = field(j, "train", "dataset");
  const json& test = field(j, "test", "dataset");
  for (std::size_t i = 0; i < train.size(); ++i) {
    d.train.push_back(scene_from(train[i], d.known_count, d.feature_dim, "train[" + std::to_string(i) + "]"));
  }
  for (std::size_t i = 0; i < test.size(); ++i) {
    d.test.push_back(scene_from(test[i], d.known_count, d.feature_dim, "test[" + std::to_string(i) + "]"));
  }
  return d;
}

json head_to_json(const ToyHead& h) {
  return {{"known_count", h.layout.known_count},
          {"unknown_slots", h.layout.unknown_slots},
          {"w1", matrix_json(h.w1)}, {"b1", vector_json(h.b1)},
          {"w2", matrix_json(h.w2)}, {"b2", vector_json(h.b2)},
          {"w3", matrix_json(h.w3)}, {"b3", vector_json(h.b3)}};
}

ToyHead head_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("head: top level must be an object");
  ToyHead h;
  try {
    h.layout.known_count = static_cast<int>(integer(j, "known_count", "head"));
    h.layout.unknown_slots = static_cast<int>(integer(j, "unknown_slots", "head"));
    h.w1 = matrix_from(field(j, "w1", "head"), "head.w1");
    h.w2 = matrix_from(field(j, "w2", "head"), "head.w2");
    h.w3 = matrix_from(field(j, "w3", "head"), "head.w3");
    h.b1 = vector_from(field(j, "b1", "head"));
    h.b2 = vector_from(field(j, "b2", "head"));
    h.b3 = vector_from(field(j, "b3", "head"));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("head: ") + e.what());
  }
  if (h.w2.rows() != h.layout.width() || h.w2.cols() != h.w1.rows() || h.b1.size() != h.w1.rows() ||
      h.b2.size() != h.w2.rows() || h.w3.rows() != 4 || h.w3.cols() != h.w1.rows() || h.b3.size() != 4) {
    throw SchemaError("head: layer shapes are inconsistent");
  }
  return h;
}

}  // namespace ucowod
