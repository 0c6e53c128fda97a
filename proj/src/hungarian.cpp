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

#include "ucowod/hungarian.hpp"

#include <limits>

#include "ucowod/types.hpp"

namespace ucowod {

Assignment hungarian_assign(const Eigen::MatrixXd& gain) {
  Assignment out;
  const Eigen::Index rows = gain.rows();
  const Eigen::Index cols = gain.cols();
  if (rows == 0 || cols == 0) {
    out.row_to_col.assign(static_cast<std::size_t>(rows), -1);
    return out;
  }
  if (!gain.allFinite()) throw Error("hungarian_assign: gain matrix has non-finite entries");

  const int n = static_cast<int>(std::max(rows, cols));
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(n, n);
  padded.topLeftCorner(rows, cols) = gain;
  // Minimise cost = max - gain; the offset keeps every cost non-negative.
  const Eigen::MatrixXd cost = padded.maxCoeff() - padded.array();

  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual root of each augmentation.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  out.row_to_col.assign(static_cast<std::size_t>(rows), -1);
  for (int j = 1; j <= n; ++j) {
    const int r = p[j] - 1;
    const int c = j - 1;
    if (r < rows && c < cols) out.row_to_col[static_cast<std::size_t>(r)] = c;
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int c = out.row_to_col[static_cast<std::size_t>(r)];
    if (c >= 0) out.total_gain += gain(r, c);
  }
  return out;
}

}  // namespace ucowod
