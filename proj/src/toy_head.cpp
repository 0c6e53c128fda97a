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

#include <cmath>
#include <random>

#include "ucowod/harness.hpp"

namespace ucowod {

ToyHead ToyHead::init(int input_dim, int hidden_dim, const HeadLayout& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto gaussian = [&rng](Eigen::Index rows, Eigen::Index cols, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    }
    return m;
  };
  ToyHead head;
  head.layout = layout;
  head.w1 = gaussian(hidden_dim, input_dim, std::sqrt(2.0 / input_dim));
  head.b1 = Eigen::VectorXd::Zero(hidden_dim);
  head.w2 = gaussian(layout.width(), hidden_dim, std::sqrt(1.0 / hidden_dim));
  head.b2 = Eigen::VectorXd::Zero(layout.width());
  head.w3 = gaussian(4, hidden_dim, 0.1 * std::sqrt(1.0 / hidden_dim));
  head.b3 = Eigen::VectorXd::Zero(4);
  return head;
}

ToyHead::Activations ToyHead::forward(const Eigen::MatrixXd& x) const {
  if (x.cols() != w1.cols()) throw Error("ToyHead: feature width does not match the first layer");
  Activations a;
  a.pre = (x * w1.transpose()).rowwise() + b1.transpose();
  a.hidden = a.pre.cwiseMax(0.0);
  a.logits = (a.hidden * w2.transpose()).rowwise() + b2.transpose();
  a.deltas = (a.hidden * w3.transpose()).rowwise() + b3.transpose();
  return a;
}

ToyHead::Gradients ToyHead::backward(const Eigen::MatrixXd& x, const Activations& act,
                                     const Eigen::MatrixXd& grad_logits,
                                     const Eigen::MatrixXd& grad_deltas) const {
  Gradients g;
  g.w2 = grad_logits.transpose() * act.hidden;
  g.b2 = grad_logits.colwise().sum().transpose();
  g.w3 = grad_deltas.transpose() * act.hidden;
  g.b3 = grad_deltas.colwise().sum().transpose();
  const Eigen::MatrixXd grad_hidden = grad_logits * w2 + grad_deltas * w3;
  const Eigen::MatrixXd grad_pre =
      grad_hidden.cwiseProduct((act.pre.array() > 0.0).cast<double>().matrix());
  g.w1 = grad_pre.transpose() * x;
  g.b1 = grad_pre.colwise().sum().transpose();
  return g;
}

void ToyHead::step(const Gradients& g, double lr) {
  w1 -= lr * g.w1;
  b1 -= lr * g.b1;
  w2 -= lr * g.w2;
  b2 -= lr * g.b2;
  w3 -= lr * g.w3;
  b3 -= lr * g.b3;
}

}  // namespace ucowod
