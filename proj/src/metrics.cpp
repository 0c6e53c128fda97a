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

#include "ucowod/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

#include "ucowod/hungarian.hpp"
#include "ucowod/parallel.hpp"

namespace ucowod {

namespace {

std::vector<ClassLabel> distinct_labels(std::span<const GroundTruthObject> gts,
                                        ClassLabel::Kind kind) {
  std::set<int> ids;
  for (const auto& g : gts) {
    if (g.label.kind() == kind && !g.is_pseudo) ids.insert(g.label.id());
  }
  std::vector<ClassLabel> out;
  for (int id : ids) {
    out.push_back(kind == ClassLabel::Kind::Known ? ClassLabel::known(id) : ClassLabel::unknown(id));
  }
  return out;
}

std::vector<int> distinct_unknown_ids(std::span<const Detection> dets) {
  std::set<int> ids;
  for (const auto& d : dets) {
    if (d.label.is_unknown()) ids.insert(d.label.id());
  }
  return {ids.begin(), ids.end()};
}

}  // namespace

std::vector<std::size_t> nms(std::span<const Box> boxes, std::span<const double> scores,
                             double iou_threshold) {
  if (boxes.size() != scores.size()) throw Error("nms: boxes and scores differ in length");
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return iou(boxes[idx], boxes[k]) <= iou_threshold;
    });
    if (clear) kept.push_back(idx);
  }
  return kept;
}

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

std::vector<int> greedy_match(std::span<const Detection> dets,
                              std::span<const GroundTruthObject> gts, double iou_threshold) {
  std::unordered_map<std::int64_t, std::vector<int>> by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    by_image[gts[g].image_id].push_back(static_cast<int>(g));
  }
  std::vector<char> taken(gts.size(), 0);
  std::vector<int> matched(dets.size(), -1);
  for (std::size_t d : score_order(dets)) {
    auto it = by_image.find(dets[d].image_id);
    if (it == by_image.end()) continue;
    int best = -1;
    double best_iou = -1.0;
    for (int g : it->second) {
      if (taken[static_cast<std::size_t>(g)]) continue;
      const double o = iou(dets[d].box, gts[static_cast<std::size_t>(g)].box);
      if (o >= iou_threshold && o > best_iou) {
        best = g;
        best_iou = o;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = 1;
      matched[d] = best;
    }
  }
  return matched;
}

double average_precision(std::span<const Detection> dets,
                         std::span<const GroundTruthObject> gts, double iou_threshold) {
  if (gts.empty() || dets.empty()) return 0.0;
  const std::vector<int> matched = greedy_match(dets, gts, iou_threshold);
  const std::vector<std::size_t> order = score_order(dets);
  const double n_gt = static_cast<double>(gts.size());

  // Padded PR curve: recall 0 in front, precision 0 at the tail.
  std::vector<double> rec{0.0}, prec{0.0};
  double tp = 0.0, fp = 0.0;
  for (std::size_t d : order) {
    (matched[d] >= 0 ? tp : fp) += 1.0;
    rec.push_back(tp / n_gt);
    prec.push_back(tp / (tp + fp));
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i) {
    if (rec[i] != rec[i - 1]) ap += (rec[i] - rec[i - 1]) * prec[i];
  }
  return ap;
}

std::vector<Detection> with_label(std::span<const Detection> dets, const ClassLabel& label) {
  std::vector<Detection> out;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
               [&](const Detection& d) { return d.label == label; });
  return out;
}

std::vector<GroundTruthObject> with_label(std::span<const GroundTruthObject> gts,
                                          const ClassLabel& label) {
  std::vector<GroundTruthObject> out;
  std::copy_if(gts.begin(), gts.end(), std::back_inserter(out),
               [&](const GroundTruthObject& g) { return g.label == label && !g.is_pseudo; });
  return out;
}

double mean_average_precision(std::span<const Detection> dets,
                              std::span<const GroundTruthObject> gts,
                              std::span<const ClassLabel> labels, double iou_threshold) {
  if (labels.empty()) return 0.0;
  std::vector<double> aps(labels.size(), 0.0);
  parallel_for(labels.size(), [&](std::size_t i) {
    aps[i] = average_precision(with_label(dets, labels[i]), with_label(gts, labels[i]),
                               iou_threshold);
  });
  return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(labels.size());
}

double pooled_recall(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
                     std::span<const ClassLabel> labels, double iou_threshold) {
  std::size_t total = 0, hit = 0;
  for (const auto& label : labels) {
    const auto class_gts = with_label(gts, label);
    const auto matched = greedy_match(with_label(dets, label), class_gts, iou_threshold);
    total += class_gts.size();
    hit += static_cast<std::size_t>(std::count_if(matched.begin(), matched.end(),
                                                  [](int m) { return m >= 0; }));
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

MatchResult match_known(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
                        double iou_threshold) {
  MatchResult out;
  out.true_positive.assign(dets.size(), false);
  out.matched_gt.assign(dets.size(), -1);

  std::set<int> classes;
  for (const auto& d : dets) {
    if (d.label.is_known()) classes.insert(d.label.id());
  }
  for (const auto& g : gts) {
    if (g.label.is_known() && !g.is_pseudo) classes.insert(g.label.id());
  }

  for (int c : classes) {
    std::vector<std::size_t> det_idx, gt_idx;
    std::vector<Detection> cd;
    std::vector<GroundTruthObject> cg;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (dets[i].label == ClassLabel::known(c)) {
        det_idx.push_back(i);
        cd.push_back(dets[i]);
      }
    }
    for (std::size_t i = 0; i < gts.size(); ++i) {
      if (gts[i].label == ClassLabel::known(c) && !gts[i].is_pseudo) {
        gt_idx.push_back(i);
        cg.push_back(gts[i]);
      }
    }
    const auto matched = greedy_match(cd, cg, iou_threshold);
    int hits = 0;
    for (std::size_t k = 0; k < matched.size(); ++k) {
      if (matched[k] >= 0) {
        out.true_positive[det_idx[k]] = true;
        out.matched_gt[det_idx[k]] = static_cast<int>(gt_idx[static_cast<std::size_t>(matched[k])]);
        ++out.tp_known;
        ++hits;
      } else {
        ++out.fp_known;
      }
    }
    out.fn_known += static_cast<int>(cg.size()) - hits;
  }
  return out;
}

int a_ose(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
          const MatchResult& match, double iou_threshold) {
  if (match.true_positive.size() != dets.size()) {
    throw Error("a_ose: match result does not belong to these detections");
  }
  int count = 0;
  for (const auto& g : gts) {
    if (!g.label.is_unknown() || g.is_pseudo) continue;
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (!dets[d].label.is_known() || match.true_positive[d]) continue;
      if (dets[d].image_id == g.image_id && iou(dets[d].box, g.box) >= iou_threshold) {
        ++count;
        break;
      }
    }
  }
  return count;
}

int a_ose(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
          double iou_threshold) {
  return a_ose(dets, gts, match_known(dets, gts, iou_threshold), iou_threshold);
}

double wilderness_impact(const MatchResult& match, int a_ose) {
  const int denom = match.tp_known + match.fp_known;
  if (denom <= 0) return 0.0;
  return static_cast<double>(a_ose) / static_cast<double>(denom);
}

UcMapResult uc_map(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
                   double iou_threshold) {
  UcMapResult out;
  for (const auto& label : distinct_labels(gts, ClassLabel::Kind::Unknown)) {
    out.gt_ids.push_back(label.id());
  }
  if (out.gt_ids.empty()) throw Error("UC-mAP undefined for this split: no unknown ground truth");
  out.pred_ids = distinct_unknown_ids(dets);

  const auto n_pred = out.pred_ids.size();
  const auto n_gt = out.gt_ids.size();
  out.gain = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_pred), static_cast<Eigen::Index>(n_gt));
  if (n_pred == 0) return out;

  std::vector<std::vector<Detection>> pred_dets(n_pred);
  std::vector<std::vector<GroundTruthObject>> class_gts(n_gt);
  for (std::size_t u = 0; u < n_pred; ++u) pred_dets[u] = with_label(dets, ClassLabel::unknown(out.pred_ids[u]));
  for (std::size_t v = 0; v < n_gt; ++v) class_gts[v] = with_label(gts, ClassLabel::unknown(out.gt_ids[v]));

  parallel_for(n_pred * n_gt, [&](std::size_t k) {
    const std::size_t u = k / n_gt, v = k % n_gt;
    out.gain(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) =
        average_precision(pred_dets[u], class_gts[v], iou_threshold);
  });

  const Assignment assignment = hungarian_assign(out.gain);
  for (std::size_t u = 0; u < n_pred; ++u) {
    const int col = assignment.row_to_col[u];
    out.permutation[out.pred_ids[u]] =
        col >= 0 ? std::optional<int>(out.gt_ids[static_cast<std::size_t>(col)]) : std::nullopt;
  }
  out.value = assignment.total_gain / static_cast<double>(n_gt);
  return out;
}

double uc_recall(std::span<const Detection> dets, std::span<const GroundTruthObject> gts,
                 double iou_threshold, const UnknownPermutation& permutation) {
  const auto labels = distinct_labels(gts, ClassLabel::Kind::Unknown);
  if (labels.empty()) throw Error("UC-Recall undefined for this split: no unknown ground truth");
  std::vector<Detection> relabeled;
  for (const auto& d : dets) {
    if (!d.label.is_unknown()) continue;
    auto it = permutation.find(d.label.id());
    if (it == permutation.end() || !it->second) continue;
    Detection r = d;
    r.label = ClassLabel::unknown(*it->second);
    relabeled.push_back(r);
  }
  return pooled_recall(relabeled, gts, labels, iou_threshold);
}

EvalReport evaluate(std::span<const GroundTruthObject> gts, std::span<const Detection> dets,
                    const EvalConfig& cfg) {
  std::vector<Detection> kept;
  for (const auto& d : dets) {
    if (!d.label.is_background() && d.score >= cfg.score_threshold) kept.push_back(d);
  }
  std::vector<GroundTruthObject> real;
  std::copy_if(gts.begin(), gts.end(), std::back_inserter(real),
               [](const GroundTruthObject& g) { return !g.is_pseudo; });

  EvalReport report;
  const auto known = distinct_labels(real, ClassLabel::Kind::Known);
  report.map_known = mean_average_precision(kept, real, known, cfg.iou_threshold);

  const MatchResult match = match_known(kept, real, cfg.iou_threshold);
  report.tp_known = match.tp_known;
  report.fp_known = match.fp_known;
  report.a_ose = a_ose(kept, real, match, cfg.iou_threshold);
  if (match.tp_known + match.fp_known == 0) {
    report.warnings.emplace_back("wi: no known detections, reported as 0");
  }
  report.wi = wilderness_impact(match, report.a_ose);

  UcMapResult ucm = uc_map(kept, real, cfg.iou_threshold);
  report.uc_map = ucm.value;
  report.uc_recall = uc_recall(kept, real, cfg.iou_threshold, ucm.permutation);
  report.permutation = std::move(ucm.permutation);
  return report;
}

}  // namespace ucowod
