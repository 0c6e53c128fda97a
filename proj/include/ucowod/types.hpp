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

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ucowod {

/// Raised on contract violations in any module (bad dimensions, empty inputs
/// where data is required, degenerate geometry).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box stored in centre form. Width and height are strictly
/// positive; use `Box::make` to get a checked instance.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;

  static Box make(double cx, double cy, double w, double h);

  double area() const { return w * h; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct Corners {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  friend bool operator==(const Corners&, const Corners&) = default;
};

Corners to_corners(const Box& b);
Box from_corners(const Corners& c);

/// Intersection over union. Symmetric, 0 for disjoint boxes, 1 for identical.
double iou(const Box& a, const Box& b);

/// Category tag. Known ids occupy [0, C), unknown ids start at C, background
/// is its own variant so it can never collide with class 0.
class ClassLabel {
 public:
  enum class Kind : std::uint8_t { Known, Unknown, Background };

  static ClassLabel known(int id);
  static ClassLabel unknown(int id);
  static ClassLabel background() { return ClassLabel(Kind::Background, -1); }

  /// Maps a flat class id onto the taxonomy: id < known_count is known,
  /// anything above is unknown.
  static ClassLabel from_id(int id, int known_count);

  Kind kind() const { return kind_; }
  int id() const { return id_; }
  bool is_known() const { return kind_ == Kind::Known; }
  bool is_unknown() const { return kind_ == Kind::Unknown; }
  bool is_background() const { return kind_ == Kind::Background; }

  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;

 private:
  ClassLabel(Kind kind, int id) : kind_(kind), id_(id) {}

  Kind kind_;
  int id_;
};

std::string to_string(const ClassLabel& label);

struct GroundTruthObject {
  std::int64_t image_id = 0;
  ClassLabel label = ClassLabel::known(0);
  Box box;
  bool is_pseudo = false;
};

struct Detection {
  std::int64_t image_id = 0;
  ClassLabel label = ClassLabel::background();
  Box box;
  double score = 0.0;
};

struct Proposal {
  std::int64_t image_id = 0;
  Box box;
  double objectness = 0.0;
};

/// Class layout of one incremental task: C known classes followed by U
/// unknown slots.
struct TaskConfig {
  int task_index = 1;
  int known_count = 20;
  int unknown_slots = 60;

  int total_classes() const { return known_count + unknown_slots; }
  bool is_known_id(int id) const { return id >= 0 && id < known_count; }
  bool is_unknown_slot(int id) const { return id >= known_count && id < total_classes(); }

  /// Next task in the sequence with `newly_known` unknown classes promoted.
  /// C + U stays fixed.
  TaskConfig advance(int newly_known) const;
};

// Validation helpers shared by the record constructors in io and harness.
void validate(const GroundTruthObject& gt);
void validate(const Detection& det);
void validate(const Proposal& p);

}  // namespace ucowod
