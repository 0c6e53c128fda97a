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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/QR>

#include "ucowod/harness.hpp"

namespace ucowod {

void RunConfig::validate() const {
  if (known_count < 1) throw Error("config: known_count must be >= 1");
  if (unknown_classes < 0 || unknown_slots < 0) throw Error("config: negative unknown counts");
  if (refine_clusters < 0) throw Error("config: refine_clusters must be >= 0");
  if (semantic_dim < known_count + unknown_classes + 1) {
    throw Error("config: semantic_dim must hold one orthogonal prototype per class plus background");
  }
  if (grid < 1 || known_per_scene + unknown_per_scene + negatives_per_scene > grid * grid) {
    throw Error("config: scene layout does not fit the grid");
  }
  if (known_per_scene < 0 || unknown_per_scene < 0 || negatives_per_scene < 0 || jitter_per_object < 0) {
    throw Error("config: negative per-scene counts");
  }
  if (train_scenes < 1 || test_scenes < 1) throw Error("config: need train and test scenes");
  if (hidden_dim < 1 || epochs < 1) throw Error("config: hidden_dim and epochs must be >= 1");
  if (!(feature_noise >= 0.0) || !(prototype_separation > 0.0) || !(image_size > 0.0)) {
    throw Error("config: noise, separation and image size must be positive");
  }
  if (!(learning_rate > 0.0) || !(refine_lr > 0.0) || !(eta >= 0.0)) {
    throw Error("config: learning rates must be positive");
  }
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) throw Error("config: warmup_fraction outside [0,1]");
  auto unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!unit(roi_foreground_iou) || !unit(detection_nms) || !unit(iou_threshold)) {
    throw Error("config: IoU thresholds must lie in (0,1)");
  }
  if (score_threshold < 0.0 || score_threshold > 1.0) throw Error("config: score_threshold outside [0,1]");
  if (weights.cls < 0.0 || weights.reg < 0.0 || weights.sim < 0.0 || weights.rpn < 0.0) {
    throw Error("config: loss weights must be non-negative");
  }
  if (refine_steps < 0 || refine_target_interval < 1) throw Error("config: bad refinement schedule");
  ulp.validate();
}

std::vector<GroundTruthObject> Dataset::test_ground_truth() const {
  std::vector<GroundTruthObject> out;
  for (const auto& s : test) out.insert(out.end(), s.gts.begin(), s.gts.end());
  return out;
}

Eigen::Vector4d box_deltas(const Box& from, const Box& to) {
  return {(to.cx - from.cx) / from.w, (to.cy - from.cy) / from.h, std::log(to.w / from.w),
          std::log(to.h / from.h)};
}

Box apply_deltas(const Box& from, const Eigen::Vector4d& deltas) {
  // Clamp log-scale deltas so a wild prediction cannot overflow exp().
  const double dw = std::clamp(deltas(2), -4.0, 4.0);
  const double dh = std::clamp(deltas(3), -4.0, 4.0);
  return Box::make(from.cx + deltas(0) * from.w, from.cy + deltas(1) * from.h, from.w * std::exp(dw),
                   from.h * std::exp(dh));
}

namespace {

struct SceneSampler {
  const RunConfig& cfg;
  const Eigen::MatrixXd& prototypes;
  std::mt19937_64& rng;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }

  Eigen::VectorXd feature(int proto_row, const Box& proposal, const Box* object) {
    Eigen::VectorXd f(cfg.feature_dim());
    for (int k = 0; k < cfg.semantic_dim; ++k) {
      f(k) = prototypes(proto_row, k) + cfg.feature_noise * normal();
    }
    const Eigen::Vector4d geo = object ? box_deltas(proposal, *object) : Eigen::Vector4d::Zero();
    for (int k = 0; k < 4; ++k) f(cfg.semantic_dim + k) = geo(k) + 0.1 * cfg.feature_noise * normal();
    return f;
  }

  Box jittered(const Box& object) {
    // Offset proposal that still overlaps the object at IoU >= 0.55.
    const double sx = (uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(0.10, 0.22);
    const double sy = uniform(-0.08, 0.08);
    const double scale = uniform(0.9, 1.15);
    for (double shrink = 1.0;; shrink *= 0.8) {
      Box b = Box::make(object.cx + sx * shrink * object.w, object.cy + sy * shrink * object.h,
                        object.w * (1.0 + (scale - 1.0) * shrink), object.h * (1.0 + (scale - 1.0) * shrink));
      if (iou(b, object) >= 0.55 || shrink < 1e-3) return b;
    }
  }

  SyntheticScene scene(std::int64_t image_id, bool label_unknowns) {
    const int c = cfg.known_count;
    const int background_row = c + cfg.unknown_classes;
    const double cell = cfg.image_size / cfg.grid;

    std::vector<int> cells(static_cast<std::size_t>(cfg.grid * cfg.grid));
    std::iota(cells.begin(), cells.end(), 0);
    std::shuffle(cells.begin(), cells.end(), rng);
    std::size_t next_cell = 0;
    auto cell_centre = [&](int idx) {
      return std::pair<double, double>{(idx % cfg.grid + 0.5) * cell, (idx / cfg.grid + 0.5) * cell};
    };

    SyntheticScene s;
    s.image_id = image_id;
    std::vector<Eigen::VectorXd> rows;
    auto add = [&](const Box& b, double objectness, int cls, int proto_row, const Box* object) {
      s.proposals.push_back(Proposal{image_id, b, objectness});
      rows.push_back(feature(proto_row, b, object));
      s.source_class.push_back(cls);
    };

    const int objects = cfg.known_per_scene + (cfg.unknown_classes > 0 ? cfg.unknown_per_scene : 0);
    for (int o = 0; o < objects; ++o) {
      const bool is_known = o < cfg.known_per_scene;
      const int cls = is_known
                          ? std::uniform_int_distribution<int>(0, c - 1)(rng)
                          : c + std::uniform_int_distribution<int>(0, cfg.unknown_classes - 1)(rng);
      const auto [x, y] = cell_centre(cells[next_cell++]);
      const Box object = Box::make(x + uniform(-0.08, 0.08) * cell, y + uniform(-0.08, 0.08) * cell,
                                   uniform(0.5, 0.8) * cell, uniform(0.5, 0.8) * cell);
      if (is_known) {
        s.gts.push_back(GroundTruthObject{image_id, ClassLabel::known(cls), object, false});
      } else if (label_unknowns) {
        s.gts.push_back(GroundTruthObject{image_id, ClassLabel::unknown(cls), object, false});
      }
      const Box aligned = Box::make(object.cx + uniform(-0.03, 0.03) * object.w,
                                    object.cy + uniform(-0.03, 0.03) * object.h,
                                    object.w * uniform(0.95, 1.05), object.h * uniform(0.95, 1.05));
      add(aligned, uniform(0.7, 1.0), cls, cls, &object);
      for (int j = 0; j < cfg.jitter_per_object; ++j) {
        add(jittered(object), uniform(0.35, 0.65), cls, cls, &object);
      }
    }
    for (int k = 0; k < cfg.negatives_per_scene; ++k) {
      const auto [x, y] = cell_centre(cells[next_cell++]);
      const Box b = Box::make(x + uniform(-0.1, 0.1) * cell, y + uniform(-0.1, 0.1) * cell,
                              uniform(0.4, 0.8) * cell, uniform(0.4, 0.8) * cell);
      add(b, uniform(0.0, 0.35), -1, background_row, nullptr);
    }

    // Present proposals in a scrambled order, as an RPN would.
    std::vector<std::size_t> perm(s.proposals.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    SyntheticScene out;
    out.image_id = image_id;
    out.gts = std::move(s.gts);
    out.features.resize(static_cast<Eigen::Index>(perm.size()), cfg.feature_dim());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      out.proposals.push_back(s.proposals[perm[i]]);
      out.source_class.push_back(s.source_class[perm[i]]);
      out.features.row(static_cast<Eigen::Index>(i)) = rows[perm[i]].transpose();
    }
    return out;
  }
};

}  // namespace

Dataset generate_dataset(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int classes = cfg.known_count + cfg.unknown_classes + 1;
  Eigen::MatrixXd gauss(cfg.semantic_dim, classes);
  for (Eigen::Index j = 0; j < gauss.cols(); ++j) {
    for (Eigen::Index i = 0; i < gauss.rows(); ++i) gauss(i, j) = normal(rng);
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
  // Orthonormal directions scaled so every pair of prototypes sits at the
  // configured separation.
  Dataset data;
  data.known_count = cfg.known_count;
  data.unknown_classes = cfg.unknown_classes;
  data.feature_dim = cfg.feature_dim();
  data.prototypes = q.leftCols(classes).transpose() * (cfg.prototype_separation / std::sqrt(2.0));

  SceneSampler sampler{cfg, data.prototypes, rng};
  for (int i = 0; i < cfg.train_scenes; ++i) data.train.push_back(sampler.scene(i, false));
  for (int i = 0; i < cfg.test_scenes; ++i) data.test.push_back(sampler.scene(cfg.train_scenes + i, true));
  return data;
}

}  // namespace ucowod
