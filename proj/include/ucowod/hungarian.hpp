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

#include <vector>

#include <Eigen/Core>

namespace ucowod {

struct Assignment {
  /// For each row, the matched column or -1 when the row landed on a
  /// zero-gain padding column.
  std::vector<int> row_to_col;
  double total_gain = 0.0;
};

/// Maximum-gain linear assignment. Rectangular inputs are zero-padded to a
/// square problem, so a row is left unassigned only when every real column
/// is better spent elsewhere (or when there are more rows than columns).
/// Runs the O(n^3) shortest augmenting path variant of the Hungarian method.
Assignment hungarian_assign(const Eigen::MatrixXd& gain);

}  // namespace ucowod
