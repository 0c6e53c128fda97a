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

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ucowod/losses.hpp"
#include "ucowod/metrics.hpp"
#include "ucowod/pseudo_label.hpp"
#include "ucowod/refinement.hpp"
#include "ucowod/types.hpp"

namespace ucowod {

/// Every knob of the desk-scale simulate -> train -> refine -> eval loop.
struct RunConfig {
  std::uint64_t seed = 7;

  // Class layout.
  int known_count = 3;
  int unknown_classes = 3;  // unknown categories present in the data
  int unknown_slots = 4;    // U of the classification head; 0 disables it

  // Synthetic scenes.
  int semantic_dim = 8;
  int train_scenes = 40;
  int test_scenes = 40;
  int known_per_scene = 2;
  int unknown_per_scene = 2;
  int negatives_per_scene = 4;
  int jitter_per_object = 1;
  double feature_noise = 0.3;
  double prototype_separation = 1.0;
  double image_size = 100.0;
  int grid = 4;

  // Head and optimisation.
  int hidden_dim = 32;
  int epochs = 150;
  double warmup_fraction = 0.5;  // share of epochs trained with supervised pair labels
  double learning_rate = 0.5;
  bool cosine_decay = true;  // anneal the step size to zero over the run
  double roi_foreground_iou = 0.5;
  UlpConfig ulp;
  LossWeights weights;
  ThresholdSchedule thresholds;
  double lambda0 = 0.0;
  double eta = 0.01;

  // Refinement.
  enum class EmbeddingSpace { Logits, Hidden };
  EmbeddingSpace refine_space = EmbeddingSpace::Hidden;
  int refine_clusters = 0;  // 0: one cluster per unknown slot of the head
  double refine_lr = 0.1;
  int refine_steps = 1000;
  int refine_target_interval = 10;
  bool refine_update_embeddings = true;

  // Inference and evaluation.
  double detection_nms = 0.5;
  double iou_threshold = 0.5;
  double score_threshold = 0.05;

  HeadLayout layout() const { return HeadLayout{known_count, unknown_slots}; }
  int feature_dim() const { return semantic_dim + 4; }
  EvalConfig eval_config() const {
    return EvalConfig{iou_threshold, score_threshold, known_count, unknown_slots};
  }
  void validate() const;
};

/// One synthetic image: proposals from a stand-in RPN, their ROI features,
/// and the annotations. Training scenes only annotate known objects.
struct SyntheticScene {
  std::int64_t image_id = 0;
  std::vector<Proposal> proposals;
  Eigen::MatrixXd features;  // one row per proposal
  std::vector<GroundTruthObject> gts;
  /// Generator bookkeeping: class index behind each proposal (known ids,
  /// then C + unknown index), -1 for background. Never read by training.
  std::vector<int> source_class;
};

struct Dataset {
  int known_count = 0;
  int unknown_classes = 0;
  int feature_dim = 0;
  Eigen::MatrixXd prototypes;  // (C + unknown + 1) x semantic_dim, background last
  std::vector<SyntheticScene> train;
  std::vector<SyntheticScene> test;

  std::vector<GroundTruthObject> test_ground_truth() const;
};

Dataset generate_dataset(const RunConfig& cfg, std::uint64_t seed);

/// Box regression parameterisation relative to a reference box.
Eigen::Vector4d box_deltas(const Box& from, const Box& to);
Box apply_deltas(const Box& from, const Eigen::Vector4d& deltas);

/// d -> hidden (ReLU) -> logits over C + U + 1 classes, with a
/// class-agnostic box-delta branch off the hidden layer.
struct ToyHead {
  HeadLayout layout;
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  static ToyHead init(int input_dim, int hidden_dim, const HeadLayout& layout, std::uint64_t seed);

  struct Activations {
    Eigen::MatrixXd pre;     // hidden pre-activation
    Eigen::MatrixXd hidden;
    Eigen::MatrixXd logits;  // n x (C + U + 1)
    Eigen::MatrixXd deltas;  // n x 4
  };
  Activations forward(const Eigen::MatrixXd& x) const;

  struct Gradients {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;
  };
  Gradients backward(const Eigen::MatrixXd& x, const Activations& act,
                     const Eigen::MatrixXd& grad_logits, const Eigen::MatrixXd& grad_deltas) const;
  void step(const Gradients& g, double lr);
};

/// Training rows assembled from every scene: ROI labels from known and
/// pseudo ground truth, regression targets for foreground rows.
struct TrainingBatch {
  Eigen::MatrixXd features;
  std::vector<ClassLabel> labels;
  Eigen::MatrixXd reg_targets;  // n x 4; only foreground rows are used
  std::vector<Eigen::Index> foreground;
  std::size_t pseudo_label_count = 0;
};

TrainingBatch build_training_batch(const RunConfig& cfg, const Dataset& data);

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<LossParts> epoch_parts;
  int self_supervised_start = -1;  // first epoch using self-labeled pairs
  int self_supervised_end = -1;    // epoch at which TH <= TL stopped it
  int lambda_updates = 0;
  double final_lambda = 0.0;
  std::size_t pseudo_label_count = 0;
};

/// Full-batch gradient descent on the combined training loss. Throws when
/// the loss becomes non-finite.
ToyHead train(const RunConfig& cfg, const Dataset& data, TrainReport* report = nullptr);

struct DetectionSet {
  std::vector<Detection> detections;
  Eigen::MatrixXd embeddings;  // head logits, row-aligned with detections
  Eigen::MatrixXd features;    // hidden activations, row-aligned with detections
};

/// Runs the head on every proposal, keeps non-background argmax
/// predictions, refines boxes and applies per-label NMS.
DetectionSet detect(const ToyHead& head, const std::vector<SyntheticScene>& scenes,
                    const RunConfig& cfg);

struct RefinedDetections {
  std::vector<Detection> before;  // test detections as produced by the head
  std::vector<Detection> after;   // unknown detections relabeled by cluster
  int clusters = 0;
  RefineResult<double> refinement;
};

/// Clusters the unknown-slot detections of the training split in
/// `cfg.refine_space`, then relabels the unknown detections of the test
/// split by nearest refined centroid (soft-assignment argmax).
RefinedDetections refine_pipeline(const ToyHead& head, const Dataset& data, const RunConfig& cfg);

/// Row-wise L2 normalisation used for the clustering space.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m);

}  // namespace ucowod
