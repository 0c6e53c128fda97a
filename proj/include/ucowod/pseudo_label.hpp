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

#include <span>
#include <vector>

#include "ucowod/types.hpp"

namespace ucowod {

struct UlpConfig {
  double nms_threshold = 0.3;
  int top_k = 5;
  double delta = 0.3;  // objectness must exceed this
  double known_overlap_threshold = 0.5;

  void validate() const;
};

/// Label id carried by every pseudo ground truth. Pseudo labels only say
/// "unknown"; the classification head decides which unknown slot fires.
inline ClassLabel pseudo_unknown_label(int known_count) { return ClassLabel::unknown(known_count); }

/// Unknown pseudo ground truth for one image:
///   NMS over proposals -> drop proposals overlapping known gt ->
///   top-k by objectness -> keep objectness > delta.
std::vector<GroundTruthObject> select_pseudo_labels(std::span<const Proposal> proposals,
                                                    std::span<const GroundTruthObject> known_gts,
                                                    const UlpConfig& cfg, int known_count);

}  // namespace ucowod
