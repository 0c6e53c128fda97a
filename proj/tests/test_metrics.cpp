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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "support/oracle.hpp"
#include "ucowod/hungarian.hpp"
#include "ucowod/metrics.hpp"

using namespace ucowod;

namespace {

Detection det(std::int64_t img, ClassLabel l, Box b, double s) { return Detection{img, l, b, s}; }
GroundTruthObject gt(std::int64_t img, ClassLabel l, Box b) { return GroundTruthObject{img, l, b, false}; }

const Box kA = Box::make(1, 1, 2, 2);
const Box kB = Box::make(2, 1, 2, 2);  // IoU 1/3 with kA

// Reference mean of per-class AP for the given labels.
double ref_map(const std::vector<Detection>& dets, const std::vector<GroundTruthObject>& gts,
               const std::vector<ClassLabel>& labels) {
  double s = 0;
  for (const auto& l : labels) s += oracle::ref_ap(oracle::dets_of(dets, l), oracle::gts_of(gts, l), 0.5);
  return labels.empty() ? 0.0 : s / static_cast<double>(labels.size());
}

std::vector<ClassLabel> labels_present(const std::vector<GroundTruthObject>& gts, ClassLabel::Kind kind) {
  std::set<int> ids;
  for (const auto& g : gts) if (g.label.kind() == kind) ids.insert(g.label.id());
  std::vector<ClassLabel> out;
  for (int id : ids) out.push_back(kind == ClassLabel::Kind::Known ? ClassLabel::known(id) : ClassLabel::unknown(id));
  return out;
}

}  // namespace

TEST_CASE("nms examples") {
  const std::vector<Box> one{kA};
  const std::vector<double> s1{0.3};
  CHECK(nms(one, s1, 0.5) == std::vector<std::size_t>{0});

  const std::vector<Box> twin{kA, kA};
  const std::vector<double> s2{0.8, 0.9};
  CHECK(nms(twin, s2, 0.5) == std::vector<std::size_t>{1});

  const std::vector<Box> pair{kA, kB};
  const std::vector<double> s3{0.5, 0.7};
  CHECK(nms(pair, s3, 0.3) == std::vector<std::size_t>{1});
  CHECK(nms(pair, s3, 0.5) == std::vector<std::size_t>{1, 0});

  CHECK(nms(std::vector<Box>{}, std::vector<double>{}, 0.5).empty());

  // Equal scores: lower index first.
  const std::vector<double> tie{0.5, 0.5};
  CHECK(nms(twin, tie, 0.5) == std::vector<std::size_t>{0});
}

TEST_CASE("nms keeps an antichain") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<Box> boxes;
    std::vector<double> scores;
    const Box base = oracle::random_box(rng);
    for (int i = 0; i < 15; ++i) {
      boxes.push_back(i % 2 ? oracle::perturb(rng, base, 0.4) : oracle::random_box(rng));
      scores.push_back(u(rng));
    }
    const double thr = 0.2 + 0.6 * u(rng);
    const auto kept = nms(boxes, scores, thr);
    for (std::size_t a = 0; a < kept.size(); ++a)
      for (std::size_t b = a + 1; b < kept.size(); ++b) CHECK(iou(boxes[kept[a]], boxes[kept[b]]) <= thr);
    // Every suppressed box overlaps some kept box with a higher rank.
    std::vector<bool> is_kept(boxes.size(), false);
    for (auto k : kept) is_kept[k] = true;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (is_kept[i]) continue;
      bool covered = false;
      for (auto k : kept) covered |= iou(boxes[i], boxes[k]) > thr && scores[k] >= scores[i];
      CHECK(covered);
    }
  }
}

TEST_CASE("average precision examples") {
  const ClassLabel c = ClassLabel::known(0);
  const Box g0 = Box::make(10, 10, 4, 4), g1 = Box::make(30, 30, 4, 4);
  const std::vector<GroundTruthObject> one{gt(0, c, g0)};
  CHECK(average_precision(std::vector<Detection>{det(0, c, g0, 0.9)}, one, 0.5) == 1.0);
  CHECK(average_precision(std::vector<Detection>{}, one, 0.5) == 0.0);
  CHECK(average_precision(std::vector<Detection>{det(0, c, g0, 0.9)}, std::vector<GroundTruthObject>{}, 0.5) == 0.0);

  const std::vector<GroundTruthObject> two{gt(0, c, g0), gt(0, c, g1)};
  const std::vector<Detection> dets{det(0, c, g0, 0.9), det(0, c, Box::make(60, 60, 4, 4), 0.8),
                                    det(0, c, g1, 0.7)};
  CHECK(average_precision(dets, two, 0.5) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

  // A duplicate of a matched box is a false positive.
  const std::vector<Detection> dup{det(0, c, g0, 0.9), det(0, c, g0, 0.8)};
  CHECK(average_precision(dup, one, 0.5) == 1.0);
  CHECK(average_precision(dup, two, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("greedy matching takes the best unmatched ground truth") {
  const ClassLabel c = ClassLabel::known(0);
  const Box g0 = Box::make(10, 10, 10, 10), g1 = Box::make(14, 10, 10, 10);
  const std::vector<GroundTruthObject> gts{gt(0, c, g0), gt(0, c, g1)};
  // First detection sits on g1; the second is closer to g1 too but must fall back to g0.
  const std::vector<Detection> dets{det(0, c, g1, 0.9), det(0, c, Box::make(13, 10, 10, 10), 0.8)};
  CHECK(greedy_match(dets, gts, 0.5) == std::vector<int>{1, 0});
  // Different image never matches.
  const std::vector<Detection> other{det(1, c, g0, 0.9)};
  CHECK(greedy_match(other, gts, 0.5) == std::vector<int>{-1});
}

TEST_CASE("AP agrees with the reference evaluator") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 300; ++t) {
    const auto scene = oracle::random_scene(rng, 2, 0, 3, 6);
    for (int k = 0; k < 2; ++k) {
      const ClassLabel l = ClassLabel::known(k);
      const auto d = oracle::dets_of(scene.dets, l);
      const auto g = oracle::gts_of(scene.gts, l);
      CHECK(average_precision(d, g, 0.5) == doctest::Approx(oracle::ref_ap(d, g, 0.5)).epsilon(1e-12));
    }
  }
}

TEST_CASE("wilderness impact") {
  MatchResult m;
  CHECK(wilderness_impact(m, 0) == 0.0);
  m.tp_known = 10;
  m.fp_known = 10;
  CHECK(wilderness_impact(m, 0) == 0.0);
  CHECK(wilderness_impact(m, 5) == doctest::Approx(0.25));
  CHECK(wilderness_impact(m, 20) == doctest::Approx(1.0));
}

TEST_CASE("a_ose counts unknown objects once") {
  const Box u = Box::make(20, 20, 6, 6);
  const std::vector<GroundTruthObject> gts{gt(0, ClassLabel::known(0), Box::make(5, 5, 4, 4)),
                                           gt(0, ClassLabel::unknown(2), u)};
  CHECK(a_ose(std::vector<Detection>{}, gts, 0.5) == 0);
  CHECK(a_ose(std::vector<Detection>{det(0, ClassLabel::unknown(2), u, 0.9)}, gts, 0.5) == 0);
  CHECK(a_ose(std::vector<Detection>{det(0, ClassLabel::known(1), u, 0.9)}, gts, 0.5) == 1);
  CHECK(a_ose(std::vector<Detection>{det(0, ClassLabel::known(1), u, 0.9), det(0, ClassLabel::known(0), u, 0.8)},
              gts, 0.5) == 1);
  // A known true positive that also overlaps an unknown object is not an open-set error.
  const Box k = Box::make(40, 40, 10, 10);
  const std::vector<GroundTruthObject> overlap{gt(0, ClassLabel::known(0), k),
                                               gt(0, ClassLabel::unknown(2), Box::make(40.5, 40, 10, 10))};
  CHECK(a_ose(std::vector<Detection>{det(0, ClassLabel::known(0), k, 0.9)}, overlap, 0.5) == 0);
}

TEST_CASE("match_known counts") {
  const ClassLabel k0 = ClassLabel::known(0);
  const std::vector<GroundTruthObject> gts{gt(0, k0, kA), gt(0, ClassLabel::unknown(3), Box::make(30, 30, 4, 4))};
  const std::vector<Detection> dets{det(0, k0, kA, 0.9), det(0, k0, kA, 0.8),
                                    det(0, ClassLabel::unknown(3), Box::make(30, 30, 4, 4), 0.7)};
  const MatchResult m = match_known(dets, gts, 0.5);
  CHECK(m.tp_known == 1);
  CHECK(m.fp_known == 1);
  CHECK(m.fn_known == 0);
  CHECK(m.true_positive == std::vector<bool>{true, false, false});
  CHECK(m.matched_gt == std::vector<int>{0, -1, -1});
}

TEST_CASE("uc_map matching rule on a fixed gain matrix") {
  Eigen::MatrixXd g(2, 2);
  g << 0.9, 0.1, 0.2, 0.8;
  CHECK(hungarian_assign(g).total_gain / 2 == doctest::Approx(0.85));
}

TEST_CASE("uc_map and uc_recall small cases") {
  const ClassLabel u3 = ClassLabel::unknown(3), u4 = ClassLabel::unknown(4);
  std::vector<GroundTruthObject> gts;
  for (int i = 0; i < 4; ++i) gts.push_back(gt(0, i < 2 ? u3 : u4, Box::make(10 + 20 * i, 10, 5, 5)));

  CHECK(uc_map(std::vector<Detection>{}, gts, 0.5).value == 0.0);
  CHECK(uc_recall(std::vector<Detection>{}, gts, 0.5, {}) == 0.0);

  // Predicted slot 7 covers the u3 objects, slot 5 covers one u4 object.
  std::vector<Detection> dets{det(0, ClassLabel::unknown(7), gts[0].box, 0.9),
                              det(0, ClassLabel::unknown(7), gts[1].box, 0.8),
                              det(0, ClassLabel::unknown(5), gts[2].box, 0.7)};
  const UcMapResult r = uc_map(dets, gts, 0.5);
  CHECK(r.permutation.at(7) == 3);
  CHECK(r.permutation.at(5) == 4);
  CHECK(r.value == doctest::Approx((1.0 + 0.5) / 2));
  CHECK(uc_recall(dets, gts, 0.5, r.permutation) == doctest::Approx(0.75));

  dets.push_back(det(0, ClassLabel::unknown(5), gts[3].box, 0.6));
  const UcMapResult all = uc_map(dets, gts, 0.5);
  CHECK(all.value == doctest::Approx(1.0));
  CHECK(uc_recall(dets, gts, 0.5, all.permutation) == doctest::Approx(1.0));

  const std::vector<GroundTruthObject> known_only{gt(0, ClassLabel::known(0), kA)};
  CHECK_THROWS_WITH_AS(uc_map(dets, known_only, 0.5), doctest::Contains("UC-mAP undefined"), Error);
  CHECK_THROWS_AS(uc_recall(dets, known_only, 0.5, {}), Error);
}

TEST_CASE("uc_map with true ids equals plain mAP") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    auto scene = oracle::random_scene(rng, 0, 3, 4, 5);
    // Keep only detections labeled with a class present in the ground truth.
    const auto classes = labels_present(scene.gts, ClassLabel::Kind::Unknown);
    std::vector<Detection> dets;
    for (const auto& d : scene.dets)
      if (std::find(classes.begin(), classes.end(), d.label) != classes.end()) dets.push_back(d);
    // Perfect class assignment: relabel each detection with the class of its best gt.
    for (auto& d : dets) {
      double best = -1;
      for (const auto& g : scene.gts)
        if (g.image_id == d.image_id && iou(d.box, g.box) > best) {
          best = iou(d.box, g.box);
          d.label = g.label;
        }
    }
    const UcMapResult r = uc_map(dets, scene.gts, 0.5);
    const double direct = mean_average_precision(dets, scene.gts, classes, 0.5);
    CHECK(std::abs(r.value - direct) <= 1e-9);
    CHECK(std::abs(uc_recall(dets, scene.gts, 0.5, r.permutation) -
                   pooled_recall(dets, scene.gts, classes, 0.5)) <= 1e-9);
  }
}

TEST_CASE("uc_map matches exhaustive search and is permutation invariant") {
  std::mt19937_64 rng(123);
  for (int t = 0; t < 150; ++t) {
    const auto scene = oracle::random_scene(rng, 1, 3, 4, 5);
    const UcMapResult r = uc_map(scene.dets, scene.gts, 0.5);
    CHECK(r.value == doctest::Approx(oracle::ref_uc_map(scene.dets, scene.gts, 0.5)).epsilon(1e-12));

    // Shuffle predicted unknown ids.
    std::vector<int> ids{1, 2, 3};
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<Detection> shuffled = scene.dets;
    for (auto& d : shuffled)
      if (d.label.is_unknown()) d.label = ClassLabel::unknown(10 + ids[static_cast<std::size_t>(d.label.id() - 1)]);
    const UcMapResult s = uc_map(shuffled, scene.gts, 0.5);
    CHECK(s.value == doctest::Approx(r.value).epsilon(1e-12));
    // Recall follows the chosen matching. When the optimum is tied the
    // relabeled run may pick another one, so compare only when they agree.
    UnknownPermutation mapped;
    for (const auto& [pred, gt] : r.permutation) mapped[10 + ids[static_cast<std::size_t>(pred - 1)]] = gt;
    if (mapped == s.permutation)
      CHECK(uc_recall(shuffled, scene.gts, 0.5, s.permutation) ==
            doctest::Approx(uc_recall(scene.dets, scene.gts, 0.5, r.permutation)).epsilon(1e-12));
    CHECK(uc_recall(shuffled, scene.gts, 0.5, mapped) ==
          doctest::Approx(uc_recall(scene.dets, scene.gts, 0.5, r.permutation)).epsilon(1e-12));

    // Monotone rescoring keeps every rank-based metric.
    std::vector<Detection> rescored = scene.dets;
    for (auto& d : rescored) d.score = std::sqrt(d.score) * 0.5;
    const UcMapResult m = uc_map(rescored, scene.gts, 0.5);
    CHECK(m.value == doctest::Approx(r.value).epsilon(1e-12));
    CHECK(uc_recall(rescored, scene.gts, 0.5, m.permutation) ==
          doctest::Approx(uc_recall(scene.dets, scene.gts, 0.5, r.permutation)).epsilon(1e-12));
    const auto known = std::vector<ClassLabel>{ClassLabel::known(0)};
    CHECK(mean_average_precision(rescored, scene.gts, known, 0.5) ==
          doctest::Approx(mean_average_precision(scene.dets, scene.gts, known, 0.5)).epsilon(1e-12));
  }
}

TEST_CASE("evaluate on empty and oracle detections") {
  std::vector<GroundTruthObject> gts{gt(0, ClassLabel::known(0), Box::make(10, 10, 5, 5)),
                                     gt(0, ClassLabel::known(1), Box::make(30, 10, 5, 5)),
                                     gt(1, ClassLabel::unknown(2), Box::make(10, 30, 5, 5)),
                                     gt(1, ClassLabel::unknown(3), Box::make(30, 30, 5, 5))};
  EvalConfig cfg{0.5, 0.05, 2, 3};
  const EvalReport empty = evaluate(gts, std::vector<Detection>{}, cfg);
  CHECK(empty.map_known == 0.0);
  CHECK(empty.a_ose == 0);
  CHECK(empty.uc_map == 0.0);
  CHECK(empty.wi == 0.0);
  CHECK(empty.warnings.size() == 1);

  std::vector<Detection> perfect;
  for (const auto& g : gts) perfect.push_back(det(g.image_id, g.label, g.box, 1.0));
  const EvalReport r = evaluate(gts, perfect, cfg);
  CHECK(r.map_known == 1.0);
  CHECK(r.wi == 0.0);
  CHECK(r.a_ose == 0);
  CHECK(r.uc_map == 1.0);
  CHECK(r.uc_recall == 1.0);
  CHECK(r.warnings.empty());

  // Pseudo ground truth and low scores are ignored.
  gts.push_back(GroundTruthObject{0, ClassLabel::unknown(2), Box::make(50, 50, 5, 5), true});
  perfect.push_back(det(0, ClassLabel::known(0), Box::make(70, 70, 5, 5), 0.01));
  const EvalReport again = evaluate(gts, perfect, cfg);
  CHECK(again.uc_recall == 1.0);
  CHECK(again.map_known == 1.0);

  const std::vector<GroundTruthObject> known_only{gts[0]};
  CHECK_THROWS_AS(evaluate(known_only, perfect, cfg), Error);
}

TEST_CASE("evaluate agrees with the reference evaluator") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    const auto scene = oracle::random_scene(rng, 2, 2, 4, 6);
    if (labels_present(scene.gts, ClassLabel::Kind::Unknown).empty()) continue;
    EvalConfig cfg{0.5, 0.0, 2, 2};
    const EvalReport r = evaluate(scene.gts, scene.dets, cfg);
    CHECK(r.map_known ==
          doctest::Approx(ref_map(scene.dets, scene.gts, labels_present(scene.gts, ClassLabel::Kind::Known)))
              .epsilon(1e-12));
    CHECK(r.uc_map == doctest::Approx(oracle::ref_uc_map(scene.dets, scene.gts, 0.5)).epsilon(1e-12));
    CHECK(r.wi >= 0.0);
    CHECK(r.wi <= 1.0);
    CHECK(r.uc_recall >= 0.0);
    CHECK(r.uc_recall <= 1.0);
    if (r.tp_known + r.fp_known > 0) CHECK(r.wi == doctest::Approx(double(r.a_ose) / (r.tp_known + r.fp_known)));
    int known_dets = 0;
    for (const auto& d : scene.dets) known_dets += d.label.is_known();
    CHECK(r.tp_known + r.fp_known == known_dets);
  }
}
