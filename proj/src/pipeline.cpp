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

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "ucowod/harness.hpp"
#include "ucowod/parallel.hpp"

namespace ucowod {

TrainingBatch build_training_batch(const RunConfig& cfg, const Dataset& data) {
  std::size_t rows = 0;
  for (const auto& s : data.train) rows += s.proposals.size();

  TrainingBatch batch;
  batch.features.resize(static_cast<Eigen::Index>(rows), data.feature_dim);
  batch.reg_targets = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), 4);
  batch.labels.reserve(rows);

  Eigen::Index r = 0;
  for (const auto& scene : data.train) {
    std::vector<GroundTruthObject> targets;
    for (const auto& g : scene.gts) {
      if (g.label.is_known()) targets.push_back(g);
    }
    if (cfg.unknown_slots > 0) {
      const auto pseudo = select_pseudo_labels(scene.proposals, targets, cfg.ulp, cfg.known_count);
      batch.pseudo_label_count += pseudo.size();
      targets.insert(targets.end(), pseudo.begin(), pseudo.end());
    }
    for (std::size_t p = 0; p < scene.proposals.size(); ++p, ++r) {
      batch.features.row(r) = scene.features.row(static_cast<Eigen::Index>(p));
      int best = -1;
      double best_iou = cfg.roi_foreground_iou;
      for (std::size_t t = 0; t < targets.size(); ++t) {
        const double o = iou(scene.proposals[p].box, targets[t].box);
        if (o >= best_iou && (best < 0 || o > best_iou)) {
          best = static_cast<int>(t);
          best_iou = o;
        }
      }
      if (best < 0) {
        batch.labels.push_back(ClassLabel::background());
        continue;
      }
      const auto& target = targets[static_cast<std::size_t>(best)];
      batch.labels.push_back(target.label);
      batch.reg_targets.row(r) = box_deltas(scene.proposals[p].box, target.box).transpose();
      batch.foreground.push_back(r);
    }
  }
  return batch;
}

ToyHead train(const RunConfig& cfg, const Dataset& data, TrainReport* report) {
  cfg.validate();
  if (data.known_count != cfg.known_count || data.feature_dim != cfg.feature_dim()) {
    throw Error("train: dataset does not match the run configuration");
  }
  const TrainingBatch batch = build_training_batch(cfg, data);
  if (batch.labels.empty()) throw Error("train: no training rows");

  ToyHead head = ToyHead::init(cfg.feature_dim(), cfg.hidden_dim, cfg.layout(), cfg.seed + 1);
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};
  rep.pseudo_label_count = batch.pseudo_label_count;

  const int warmup = static_cast<int>(std::floor(cfg.epochs * cfg.warmup_fraction));
  const bool use_sim = cfg.weights.sim > 0.0;
  double lambda = cfg.lambda0;
  bool self_supervision_done = false;

  const auto n_fg = static_cast<Eigen::Index>(batch.foreground.size());
  Eigen::MatrixXd fg_targets(n_fg, 4);
  for (Eigen::Index k = 0; k < n_fg; ++k) fg_targets.row(k) = batch.reg_targets.row(batch.foreground[k]);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const ToyHead::Activations act = head.forward(batch.features);

    LossParts parts;
    const LossResult<double> cls = ucls_loss<double>(act.logits, batch.labels, cfg.layout());
    parts.ucls = cls.value;
    Eigen::MatrixXd grad_logits = cfg.weights.cls * cls.gradient;

    Eigen::MatrixXd grad_deltas = Eigen::MatrixXd::Zero(act.deltas.rows(), 4);
    if (n_fg > 0) {
      Eigen::MatrixXd fg_pred(n_fg, 4);
      for (Eigen::Index k = 0; k < n_fg; ++k) fg_pred.row(k) = act.deltas.row(batch.foreground[k]);
      const LossResult<double> reg = l1_reg_loss<double>(fg_pred, fg_targets);
      parts.reg = reg.value;
      for (Eigen::Index k = 0; k < n_fg; ++k) {
        grad_deltas.row(batch.foreground[k]) = cfg.weights.reg * reg.gradient.row(k);
      }
    }

    if (use_sim) {
      const Eigen::MatrixXd s = similarity_matrix<double>(act.logits);
      LossResult<double> sim;
      const bool self_phase = epoch >= warmup && !self_supervision_done &&
                              !cfg.thresholds.terminated(lambda);
      if (epoch >= warmup && !self_supervision_done && cfg.thresholds.terminated(lambda)) {
        self_supervision_done = true;
        rep.self_supervised_end = epoch;
      }
      if (self_phase) {
        if (rep.self_supervised_start < 0) rep.self_supervised_start = epoch;
        const PairLabelMatrix self_labels = self_label_matrix(s, batch.labels, lambda, cfg.thresholds);
        sim = self_sim_loss(combined_label_matrix(self_labels, batch.labels), s, lambda, cfg.thresholds);
        lambda = update_lambda(lambda, cfg.eta, cfg.thresholds);
        ++rep.lambda_updates;
      } else {
        sim = sim_loss(supervised_label_matrix(batch.labels), s);
      }
      parts.sim = sim.value;
      grad_logits += cfg.weights.sim * similarity_backward<double>(act.logits, sim.gradient);
    }

    const double total = total_training_loss(parts, cfg.weights);
    if (!std::isfinite(total)) {
      throw Error("train: loss diverged at epoch " + std::to_string(epoch));
    }
    rep.epoch_loss.push_back(total);
    rep.epoch_parts.push_back(parts);
    const double lr = cfg.cosine_decay
                          ? 0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs))
                          : cfg.learning_rate;
    head.step(head.backward(batch.features, act, grad_logits, grad_deltas), lr);
  }
  if (use_sim && !self_supervision_done && cfg.thresholds.terminated(lambda)) {
    rep.self_supervised_end = cfg.epochs;
  }
  rep.final_lambda = lambda;
  return head;
}

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace

DetectionSet detect(const ToyHead& head, const std::vector<SyntheticScene>& scenes,
                    const RunConfig& cfg) {
  const HeadLayout layout = head.layout;
  std::vector<DetectionSet> per_scene(scenes.size());

  parallel_for(scenes.size(), [&](std::size_t si) {
    const SyntheticScene& scene = scenes[si];
    const ToyHead::Activations act = head.forward(scene.features);
    // Candidates grouped by predicted label: (kind, id) -> rows.
    std::map<std::pair<int, int>, std::vector<Eigen::Index>> groups;
    std::vector<Detection> cand(scene.proposals.size());
    for (Eigen::Index i = 0; i < act.logits.rows(); ++i) {
      const Eigen::VectorXd p = softmax(act.logits.row(i).transpose());
      Eigen::Index best = 0;
      p.maxCoeff(&best);
      if (best == layout.background_index()) continue;
      const int id = static_cast<int>(best);
      Detection d;
      d.image_id = scene.image_id;
      d.label = id < layout.known_count ? ClassLabel::known(id) : ClassLabel::unknown(id);
      d.box = apply_deltas(scene.proposals[static_cast<std::size_t>(i)].box, act.deltas.row(i).transpose());
      d.score = p(best);
      cand[static_cast<std::size_t>(i)] = d;
      groups[{static_cast<int>(d.label.kind()), id}].push_back(i);
    }
    std::vector<Eigen::Index> kept_rows;
    for (const auto& [key, rows] : groups) {
      std::vector<Box> boxes;
      std::vector<double> scores;
      for (Eigen::Index r : rows) {
        boxes.push_back(cand[static_cast<std::size_t>(r)].box);
        scores.push_back(cand[static_cast<std::size_t>(r)].score);
      }
      for (std::size_t k : nms(boxes, scores, cfg.detection_nms)) kept_rows.push_back(rows[k]);
    }
    DetectionSet& out = per_scene[si];
    out.embeddings.resize(static_cast<Eigen::Index>(kept_rows.size()), act.logits.cols());
    out.features.resize(static_cast<Eigen::Index>(kept_rows.size()), act.hidden.cols());
    for (std::size_t k = 0; k < kept_rows.size(); ++k) {
      out.detections.push_back(cand[static_cast<std::size_t>(kept_rows[k])]);
      out.embeddings.row(static_cast<Eigen::Index>(k)) = act.logits.row(kept_rows[k]);
      out.features.row(static_cast<Eigen::Index>(k)) = act.hidden.row(kept_rows[k]);
    }
  });

  DetectionSet all;
  Eigen::Index rows = 0;
  for (const auto& s : per_scene) rows += s.embeddings.rows();
  all.embeddings.resize(rows, layout.width());
  all.features.resize(rows, head.w1.rows());
  Eigen::Index r = 0;
  for (auto& s : per_scene) {
    all.detections.insert(all.detections.end(), s.detections.begin(), s.detections.end());
    if (s.embeddings.rows() > 0) {
      all.embeddings.middleRows(r, s.embeddings.rows()) = s.embeddings;
      all.features.middleRows(r, s.features.rows()) = s.features;
    }
    r += s.embeddings.rows();
  }
  return all;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

namespace {

struct UnknownRows {
  std::vector<std::size_t> index;  // positions in the detection list
  Eigen::MatrixXd embeddings;
};

UnknownRows unknown_rows(const DetectionSet& set, RunConfig::EmbeddingSpace space) {
  const Eigen::MatrixXd& source =
      space == RunConfig::EmbeddingSpace::Hidden ? set.features : set.embeddings;
  UnknownRows out;
  for (std::size_t i = 0; i < set.detections.size(); ++i) {
    if (set.detections[i].label.is_unknown()) {
      out.index.push_back(i);
    }
  }
  out.embeddings.resize(static_cast<Eigen::Index>(out.index.size()), source.cols());
  for (std::size_t k = 0; k < out.index.size(); ++k) {
    out.embeddings.row(static_cast<Eigen::Index>(k)) = source.row(static_cast<Eigen::Index>(out.index[k]));
  }
  out.embeddings = normalize_rows(out.embeddings);
  return out;
}

}  // namespace

RefinedDetections refine_pipeline(const ToyHead& head, const Dataset& data, const RunConfig& cfg) {
  const UnknownRows train_rows = unknown_rows(detect(head, data.train, cfg), cfg.refine_space);
  if (train_rows.index.empty()) {
    throw Error("refine_pipeline: the head produced no unknown detections; try lowering the ULP delta");
  }

  RefineOptions opt;
  opt.steps = cfg.refine_steps;
  opt.lr = cfg.refine_lr;
  opt.target_interval = cfg.refine_target_interval;
  opt.update_embeddings = cfg.refine_update_embeddings;
  opt.seed = cfg.seed + 2;

  RefinedDetections out;
  out.clusters = cfg.refine_clusters > 0 ? cfg.refine_clusters : cfg.unknown_slots;
  if (static_cast<std::size_t>(out.clusters) > train_rows.index.size()) {
    throw Error("refine_pipeline: fewer unknown detections than clusters; try lowering the ULP delta");
  }
  out.refinement = refine<double>(train_rows.embeddings, out.clusters, opt);

  const DetectionSet test = detect(head, data.test, cfg);
  out.before = test.detections;
  out.after = test.detections;
  const UnknownRows test_rows = unknown_rows(test, cfg.refine_space);
  if (!test_rows.index.empty()) {
    const std::vector<int> cluster =
        hard_assignments<double>(soft_assignment<double>(test_rows.embeddings, out.refinement.centroids));
    for (std::size_t k = 0; k < test_rows.index.size(); ++k) {
      out.after[test_rows.index[k]].label = ClassLabel::unknown(cfg.known_count + cluster[k]);
    }
  }
  return out;
}

}  // namespace ucowod
