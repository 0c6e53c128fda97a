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
#include "ucowod/losses.hpp"

using namespace ucowod;
using Eigen::MatrixXd;

namespace {

const HeadLayout kLayout{3, 4};

std::vector<ClassLabel> random_labels(std::mt19937_64& rng, int n, const HeadLayout& layout) {
  std::uniform_int_distribution<int> pick(0, layout.known_count + 1);
  std::vector<ClassLabel> out;
  for (int i = 0; i < n; ++i) {
    const int v = pick(rng);
    if (v < layout.known_count) out.push_back(ClassLabel::known(v));
    else if (v == layout.known_count) out.push_back(ClassLabel::unknown(layout.known_count));
    else out.push_back(ClassLabel::background());
  }
  return out;
}

MatrixXd gaussian(std::mt19937_64& rng, int r, int c, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST_CASE("ucls examples") {
  MatrixXd z = MatrixXd::Constant(1, kLayout.width(), -200.0);
  z(0, 1) = 200.0;
  const std::vector<ClassLabel> known{ClassLabel::known(1)};
  CHECK(ucls_loss<double>(z, known, kLayout).value == doctest::Approx(0.0));

  // Known and background logits at 0, other unknown slots masked:
  // p = e^a / (e^a + 4) = e^-1  <=>  e^a = 4 / (e - 1).
  MatrixXd u = MatrixXd::Zero(1, kLayout.width());
  u(0, 4) = std::log(4.0 / (std::exp(1.0) - 1.0));
  u(0, 3) = u(0, 4) - 1.0;
  const std::vector<ClassLabel> pseudo{ClassLabel::unknown(3)};
  CHECK(ucls_loss<double>(u, pseudo, kLayout).value == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(ucls_loss<double>(MatrixXd(0, kLayout.width()), std::vector<ClassLabel>{}, kLayout), Error);
  CHECK_THROWS_AS(ucls_loss<double>(u, pseudo, HeadLayout{3, 0}), Error);
}

TEST_CASE("ucls gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const MatrixXd z = gaussian(rng, 12, kLayout.width(), 2.0);
    const auto labels = random_labels(rng, 12, kLayout);
    const LossResult<double> r = ucls_loss<double>(z, labels, kLayout);
    const MatrixXd num = oracle::numeric_gradient(
        [&](const MatrixXd& x) { return ucls_loss<double>(x, labels, kLayout).value; }, z);
    CHECK(oracle::relative_error(r.gradient, num) < 1e-4);
  }
}

TEST_CASE("ucls ignores which unknown slot holds the max") {
  std::mt19937_64 rng(4);
  const MatrixXd z = gaussian(rng, 10, kLayout.width());
  const auto labels = random_labels(rng, 10, kLayout);
  MatrixXd swapped = z;
  swapped.col(3).swap(swapped.col(6));
  swapped.col(4).swap(swapped.col(5));
  CHECK(ucls_loss<double>(swapped, labels, kLayout).value ==
        doctest::Approx(ucls_loss<double>(z, labels, kLayout).value).epsilon(1e-12));
}

TEST_CASE("similarity matrix") {
  MatrixXd e(3, 2);
  e << 1, 0, 1, 1, 0, 2;
  const MatrixXd c = cosine_matrix<double>(e);
  CHECK(c(0, 1) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(c(0, 2) == doctest::Approx(0.0));
  CHECK(c(1, 1) == doctest::Approx(1.0));
  const MatrixXd s = similarity_matrix<double>(e);
  CHECK(s(0, 2) == doctest::Approx(1e-6));
  CHECK(s(1, 1) == doctest::Approx(1 - 1e-6));
  CHECK((s - s.transpose()).norm() == 0.0);

  MatrixXd zero = e;
  zero.row(1).setZero();
  CHECK_THROWS_WITH_AS(similarity_matrix<double>(zero), doctest::Contains("row 1"), Error);

  std::mt19937_64 rng(1);
  const MatrixXd r = gaussian(rng, 6, 5);
  MatrixXd scaled = r;
  scaled.row(2) *= 7.5;
  CHECK((similarity_matrix<double>(scaled) - similarity_matrix<double>(r)).norm() < 1e-12);
}

TEST_CASE("pair labels") {
  const std::vector<ClassLabel> l{ClassLabel::known(0), ClassLabel::known(0), ClassLabel::background(),
                                  ClassLabel::unknown(3), ClassLabel::unknown(3)};
  const PairLabelMatrix m = supervised_label_matrix(l);
  CHECK(m(0, 1) == kPositive);
  CHECK(m(0, 2) == kNegative);
  CHECK(m(2, 2) == kPositive);
  CHECK(m(3, 4) == kNotSelected);
  CHECK(m(3, 3) == kNotSelected);
  CHECK(m(0, 3) == kNegative);
  CHECK(m == m.transpose());

  const std::vector<ClassLabel> uu{ClassLabel::unknown(3), ClassLabel::unknown(3)};
  MatrixXd s(2, 2);
  s << 1 - 1e-6, 0.99, 0.99, 1 - 1e-6;
  CHECK(self_label_matrix<double>(s, uu, 0.0)(0, 1) == kPositive);
  s(0, 1) = s(1, 0) = 0.40;
  CHECK(self_label_matrix<double>(s, uu, 0.0)(0, 1) == kNegative);
  s(0, 1) = s(1, 0) = 0.7;
  const PairLabelMatrix self = self_label_matrix<double>(s, uu, 0.0);
  CHECK(self(0, 1) == kNotSelected);
  CHECK(combined_label_matrix(self, uu)(0, 1) == kNotSelected);
  CHECK_THROWS_AS(self_label_matrix<double>(s, uu, 0.45), SelfSupervisionTerminated);

  PairLabelMatrix tilde = PairLabelMatrix::Zero(2, 2);
  tilde(0, 1) = kPositive;
  tilde(1, 0) = kNegative;
  const PairLabelMatrix comb = combined_label_matrix(tilde, uu);
  CHECK(comb(0, 1) == kPositive);
  CHECK(comb(1, 0) == kNegative);
}

TEST_CASE("self labels grow with lambda") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    const int n = 8;
    std::vector<ClassLabel> l(n, ClassLabel::unknown(3));
    l[0] = ClassLabel::known(0);
    MatrixXd s(n, n);
    for (int i = 0; i < n; ++i) for (int j = 0; j <= i; ++j) s(i, j) = s(j, i) = u(rng);
    const double a = 0.44 * u(rng), b = a + (0.4499 - a) * u(rng);
    const PairLabelMatrix ma = self_label_matrix<double>(s, l, a);
    const PairLabelMatrix mb = self_label_matrix<double>(s, l, b);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (ma(i, j) != kNotSelected) CHECK(mb(i, j) == ma(i, j));
  }
}

TEST_CASE("sim loss values") {
  PairLabelMatrix pos(1, 1);
  pos(0, 0) = kPositive;
  MatrixXd s(1, 1);
  s(0, 0) = 0.5;
  CHECK(sim_loss<double>(pos, s).value == doctest::Approx(std::log(2.0)));
  s(0, 0) = 1 - 1e-6;
  CHECK(sim_loss<double>(pos, s).value == doctest::Approx(0.0).epsilon(1e-5));

  const PairLabelMatrix none = PairLabelMatrix::Zero(1, 1);
  const LossResult<double> empty = sim_loss<double>(none, s);
  CHECK(empty.value == 0.0);
  CHECK(empty.empty_selection);

  const LossResult<double> pen = self_sim_loss<double>(none, s, 0.0);
  CHECK(pen.value == doctest::Approx(0.495));
  CHECK(self_sim_loss<double>(none, s, 0.45).value == doctest::Approx(0.0).epsilon(1e-12));

  s(0, 0) = 0.3;
  CHECK((self_sim_loss<double>(pos, s, 0.2).gradient - sim_loss<double>(pos, s).gradient).norm() == 0.0);
}

TEST_CASE("sim gradients through the similarity matrix") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed + 1000);
    const int n = 7;
    const MatrixXd e = gaussian(rng, n, 5);
    auto labels = random_labels(rng, n, kLayout);
    labels[0] = labels[1] = ClassLabel::unknown(3);

    const PairLabelMatrix m = supervised_label_matrix(labels);
    auto supervised = [&](const MatrixXd& x) { return sim_loss<double>(m, similarity_matrix<double>(x)).value; };
    const MatrixXd s = similarity_matrix<double>(e);
    const MatrixXd g = similarity_backward<double>(e, sim_loss<double>(m, s).gradient);
    CHECK(oracle::relative_error(g, oracle::numeric_gradient(supervised, e)) < 1e-4);

    // Self-supervised variant with the pair selection frozen at `e`.
    const double lambda = 0.2;
    const PairLabelMatrix comb = combined_label_matrix(self_label_matrix<double>(s, labels, lambda), labels);
    auto self = [&](const MatrixXd& x) {
      return self_sim_loss<double>(comb, similarity_matrix<double>(x), lambda).value;
    };
    const MatrixXd gs = similarity_backward<double>(e, self_sim_loss<double>(comb, s, lambda).gradient);
    CHECK(oracle::relative_error(gs, oracle::numeric_gradient(self, e)) < 1e-4);
  }
}

TEST_CASE("lambda schedule") {
  const ThresholdSchedule sched;
  CHECK(update_lambda(0.0, 0.01) == doctest::Approx(0.011));
  CHECK(update_lambda(0.3, 0.0) == 0.3);
  CHECK_THROWS_AS(update_lambda(0.0, -1.0), Error);
  double lambda = 0.0;
  int steps = 0;
  double prev = sched.penalty(lambda);
  while (!sched.terminated(lambda)) {
    lambda = update_lambda(lambda, 0.01);
    ++steps;
    CHECK(prev - sched.penalty(lambda) == doctest::Approx(0.0121).epsilon(1e-9));
    prev = sched.penalty(lambda);
  }
  CHECK(steps == 41);
  CHECK(steps == static_cast<int>(std::ceil(0.45 / 0.011)));
}

TEST_CASE("l1 regression") {
  MatrixXd p(1, 4), t = MatrixXd::Zero(1, 4);
  p << 1, -1, 0, 0;
  const LossResult<double> r = l1_reg_loss<double>(p, t);
  CHECK(r.value == doctest::Approx(0.5));
  CHECK(r.gradient(0, 0) == doctest::Approx(0.25));
  CHECK(r.gradient(0, 1) == doctest::Approx(-0.25));
  CHECK(r.gradient(0, 2) == 0.0);
  CHECK(l1_reg_loss<double>(p, p).value == 0.0);
  CHECK_THROWS_AS(l1_reg_loss<double>(p, MatrixXd::Zero(2, 4)), Error);
}

TEST_CASE("total loss") {
  const LossWeights w;
  CHECK(total_training_loss(LossParts{}, w) == 0.0);
  CHECK(total_training_loss(LossParts{1, 1, 1}, w) == doctest::Approx(2.5));
  LossWeights w2 = w;
  w2.sim *= 2;
  CHECK(total_training_loss(LossParts{1, 1, 1}, w2) - total_training_loss(LossParts{1, 1, 1}, w) ==
        doctest::Approx(0.5));
}
