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

#include "ucowod/types.hpp"

#include <algorithm>
#include <cmath>

namespace ucowod {

Box Box::make(double cx, double cy, double w, double h) {
  if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(cx) || !std::isfinite(cy) ||
      !std::isfinite(w) || !std::isfinite(h)) {
    throw Error("box requires finite centre and positive width/height");
  }
  return Box{cx, cy, w, h};
}

Corners to_corners(const Box& b) {
  return Corners{b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w, b.cy + 0.5 * b.h};
}

Box from_corners(const Corners& c) {
  return Box::make(0.5 * (c.xmin + c.xmax), 0.5 * (c.ymin + c.ymax), c.xmax - c.xmin,
                   c.ymax - c.ymin);
}

double iou(const Box& a, const Box& b) {
  const Corners ca = to_corners(a);
  const Corners cb = to_corners(b);
  const double iw = std::min(ca.xmax, cb.xmax) - std::max(ca.xmin, cb.xmin);
  const double ih = std::min(ca.ymax, cb.ymax) - std::max(ca.ymin, cb.ymin);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

ClassLabel ClassLabel::known(int id) {
  if (id < 0) throw Error("known class id must be non-negative");
  return ClassLabel(Kind::Known, id);
}

ClassLabel ClassLabel::unknown(int id) {
  if (id < 0) throw Error("unknown class id must be non-negative");
  return ClassLabel(Kind::Unknown, id);
}

ClassLabel ClassLabel::from_id(int id, int known_count) {
  return id < known_count ? known(id) : unknown(id);
}

std::string to_string(const ClassLabel& label) {
  switch (label.kind()) {
    case ClassLabel::Kind::Known:
      return "known(" + std::to_string(label.id()) + ")";
    case ClassLabel::Kind::Unknown:
      return "unknown(" + std::to_string(label.id()) + ")";
    case ClassLabel::Kind::Background:
      break;
  }
  return "background";
}

TaskConfig TaskConfig::advance(int newly_known) const {
  if (newly_known < 0 || newly_known > unknown_slots) {
    throw Error("cannot promote more unknown classes than there are slots");
  }
  return TaskConfig{task_index + 1, known_count + newly_known, unknown_slots - newly_known};
}

void validate(const GroundTruthObject& gt) {
  if (gt.label.is_background()) throw Error("ground truth cannot be background");
  if (gt.is_pseudo && !gt.label.is_unknown()) {
    throw Error("pseudo ground truth must carry an unknown label");
  }
  Box::make(gt.box.cx, gt.box.cy, gt.box.w, gt.box.h);
}

void validate(const Detection& det) {
  if (!(det.score >= 0.0 && det.score <= 1.0)) throw Error("detection score outside [0,1]");
  Box::make(det.box.cx, det.box.cy, det.box.w, det.box.h);
}

void validate(const Proposal& p) {
  if (!(p.objectness >= 0.0 && p.objectness <= 1.0)) {
    throw Error("proposal objectness outside [0,1]");
  }
  Box::make(p.box.cx, p.box.cy, p.box.w, p.box.h);
}

}  // namespace ucowod
