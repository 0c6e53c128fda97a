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

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ucowod/types.hpp"

namespace ucowod {

/// Predicted unknown id -> ground-truth unknown id, or nullopt when the
/// predicted class was left without a partner by the assignment.
using UnknownPermutation = std::map<int, std::optional<int>>;

struct EvalConfig {
  double iou_threshold = 0.5;
  double score_threshold = 0.05;
  int known_count = 20;
  int unknown_slots = 60;
};

/// Greedy NMS. Candidates are visited by descending score (ties by ascending
/// index); a box is kept iff its IoU with every kept box is <= threshold.
/// Returns kept indices in visit order.
std::vector<std::size_t> nms(std::span<const Box> boxes, std::span<const double> scores,
                             double iou_threshold);

/// Indices of `dets` ordered by descending score, ties by insertion index.
std::vector<std::size_t> score_order(std::span<const Detection> dets);

/// Greedy one-to-one matching of detections to ground truth within each
/// image. Detections are visited in score order and take the highest-IoU
/// unmatched ground truth with IoU >= threshold (ties to the lowest gt
/// index). Labels are not inspected; callers pre-filter by class.
/// Result is indexed like `dets`; -1 means false positive.
std::vector<int> greedy_match(std::span<const Detection> dets,
                              std::span<const GroundTruthObject> gts, double iou_threshold);

/// All-point interpolated AP for one class. Zero ground truth gives 0.
double average_precision(std::span<const Detection> dets,
                         std::span<const GroundTruthObject> gts, double iou_threshold);

std::vector<Detection> with_label(std::span<const Detection> dets, const ClassLabel& label);
std::vector<GroundTruthObject> with_label(std::span<const GroundTruthObject> gts,
                                          const ClassLabel& label);

/// Mean AP over `labels`, each label evaluated against itself.
double mean_average_precision(std::span<const Detection> dets,
                              std::span<const GroundTruthObject> gts,
                              std::span<const ClassLabel> labels, double iou_threshold);

/// Pooled recall over the ground truth carrying any of `labels`.
double pooled_recall(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
                     std::span<const ClassLabel> labels, double iou_threshold);

struct MatchResult {
  std::vector<bool> true_positive;  // indexed like the input detections
  std::vector<int> matched_gt;      // index into the input gts, or -1
  int tp_known = 0;
  int fp_known = 0;
  int fn_known = 0;
};

/// Class-wise matching of known-labeled detections against known ground
/// truth. Non-known detections are neither TP nor FP.
MatchResult match_known(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
                        double iou_threshold);

/// Number of unknown ground-truth objects covered (IoU >= threshold) by at
/// least one known-labeled detection that is not a known true positive.
int a_ose(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
          const MatchResult& match, double iou_threshold);
int a_ose(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
          double iou_threshold);

/// A-OSE / (TP_K + FP_K); 0 when there are no known detections.
double wilderness_impact(const MatchResult& match, int a_ose);

struct UcMapResult {
  double value = 0.0;
  UnknownPermutation permutation;
  std::vector<int> pred_ids;  // rows of `gain`
  std::vector<int> gt_ids;    // columns of `gain`
  Eigen::MatrixXd gain;       // AP of predicted class u against gt class v
};

/// mAP over ground-truth unknown classes after the best one-to-one matching
/// of predicted unknown classes. Throws when the ground truth has no
/// unknown class.
UcMapResult uc_map(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
                   double iou_threshold);

/// Recall over all unknown ground truth after relabeling predicted unknown
/// classes through `permutation`. Throws when there is no unknown gt.
double uc_recall(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
                 double iou_threshold, const UnknownPermutation& permutation);

struct EvalReport {
  double map_known = 0.0;
  double wi = 0.0;
  int a_ose = 0;
  double uc_map = 0.0;
  double uc_recall = 0.0;
  UnknownPermutation permutation;
  int tp_known = 0;
  int fp_known = 0;
  std::vector<std::string> warnings;
};

/// Full open-world report. Detections below the score threshold and
/// background detections are dropped, pseudo ground truth is ignored.
EvalReport evaluate(std::span<const GroundTruthObject> gts, std::span<const Detection> dets,
                    const EvalConfig& cfg);

}  // namespace ucowod
