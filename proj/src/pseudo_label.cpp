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

#include "ucowod/pseudo_label.hpp"

#include <algorithm>

#include "ucowod/metrics.hpp"

namespace ucowod {

void UlpConfig::validate() const {
  auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!open_unit(nms_threshold) || !open_unit(delta) || !open_unit(known_overlap_threshold)) {
    throw Error("ULP thresholds must lie in (0,1)");
  }
  if (top_k < 1) throw Error("ULP top_k must be >= 1");
}

std::vector<GroundTruthObject> select_pseudo_labels(std::span<const Proposal> proposals,
                                                    std::span<const GroundTruthObject> known_gts,
                                                    const UlpConfig& cfg, int known_count) {
  cfg.validate();
  std::vector<Box> boxes;
  std::vector<double> scores;
  boxes.reserve(proposals.size());
  scores.reserve(proposals.size());
  for (const auto& p : proposals) {
    boxes.push_back(p.box);
    scores.push_back(p.objectness);
  }

  // nms() returns survivors by descending objectness, so top-k is a prefix.
  std::vector<GroundTruthObject> out;
  int taken = 0;
  for (std::size_t idx : nms(boxes, scores, cfg.nms_threshold)) {
    if (taken >= cfg.top_k) break;
    const Proposal& p = proposals[idx];
    const bool background = std::none_of(known_gts.begin(), known_gts.end(), [&](const auto& g) {
      return iou(p.box, g.box) >= cfg.known_overlap_threshold;
    });
    if (!background) continue;
    ++taken;
    if (p.objectness > cfg.delta) {
      out.push_back(GroundTruthObject{p.image_id, pseudo_unknown_label(known_count), p.box, true});
    }
  }
  return out;
}

}  // namespace ucowod
