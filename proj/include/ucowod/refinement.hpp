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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "ucowod/losses.hpp"
#include "ucowod/types.hpp"

namespace ucowod {

/// Squared Euclidean distances between rows of `a` and rows of `b`.
template <typename Scalar>
MatrixX<Scalar> squared_distances(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  MatrixX<Scalar> d(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    d.col(j) = (a.rowwise() - b.row(j)).rowwise().squaredNorm();
  }
  return d;
}

/// k-means++ seeding followed by Lloyd iterations. Stops after `max_iter`
/// rounds or once no centroid moves more than `tol`. An emptied cluster
/// keeps its previous centroid.
template <typename Scalar>
MatrixX<Scalar> kmeans_init(const MatrixX<Scalar>& points, int k, std::uint64_t seed,
                            int max_iter = 100, Scalar tol = Scalar(1e-6)) {
  const Eigen::Index m = points.rows();
  if (k < 1) throw Error("kmeans_init: need at least one cluster");
  if (m < k) throw Error("kmeans_init: fewer points than clusters");

  std::mt19937_64 rng(seed);
  MatrixX<Scalar> centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, m - 1);
  centroids.row(0) = points.row(first(rng));

  VectorX<Scalar> d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = static_cast<double>(d2.sum());
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      pick = m - 1;
      for (Eigen::Index i = 0; i < m; ++i) {
        acc += static_cast<double>(d2(i));
        if (acc > target && d2(i) > Scalar(0)) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    centroids.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  std::vector<Eigen::Index> owner(static_cast<std::size_t>(m), 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    const MatrixX<Scalar> dist = squared_distances(points, centroids);
    for (Eigen::Index i = 0; i < m; ++i) dist.row(i).minCoeff(&owner[static_cast<std::size_t>(i)]);

    MatrixX<Scalar> sums = MatrixX<Scalar>::Zero(k, points.cols());
    VectorX<Scalar> counts = VectorX<Scalar>::Zero(k);
    for (Eigen::Index i = 0; i < m; ++i) {
      sums.row(owner[static_cast<std::size_t>(i)]) += points.row(i);
      counts(owner[static_cast<std::size_t>(i)]) += Scalar(1);
    }
    Scalar moved = 0;
    for (int c = 0; c < k; ++c) {
      if (counts(c) == Scalar(0)) continue;
      const auto next = (sums.row(c) / counts(c)).eval();
      moved = std::max(moved, (next - centroids.row(c)).norm());
      centroids.row(c) = next;
    }
    if (moved < tol) break;
  }
  return centroids;
}

/// Student-t soft assignment: P_ij proportional to (1 + |E_i - Phi_j|^2)^-1.
template <typename Scalar>
MatrixX<Scalar> soft_assignment(const MatrixX<Scalar>& e, const MatrixX<Scalar>& phi) {
  if (phi.rows() == 0) throw Error("soft_assignment: no centroids");
  if (phi.cols() != e.cols()) throw Error("soft_assignment: dimension mismatch");
  MatrixX<Scalar> kernel = (Scalar(1) + squared_distances(e, phi).array()).inverse().matrix();
  const VectorX<Scalar> rows = kernel.rowwise().sum();
  return rows.cwiseInverse().asDiagonal() * kernel;
}

/// Soft cluster frequencies F_j = sum_i P_ij.
template <typename Scalar>
VectorX<Scalar> cluster_frequencies(const MatrixX<Scalar>& p) {
  return p.colwise().sum().transpose();
}

/// Sharpened target Q_ij proportional to P_ij^2 / F_j, rows renormalised.
template <typename Scalar>
MatrixX<Scalar> target_distribution(const MatrixX<Scalar>& p) {
  const VectorX<Scalar> f = cluster_frequencies(p);
  for (Eigen::Index j = 0; j < f.size(); ++j) {
    if (!(f(j) > Scalar(0))) throw Error("target_distribution: cluster " + std::to_string(j) + " is empty");
  }
  MatrixX<Scalar> weighted = p.array().square().matrix() * f.cwiseInverse().asDiagonal();
  const VectorX<Scalar> rows = weighted.rowwise().sum();
  return rows.cwiseInverse().asDiagonal() * weighted;
}

inline constexpr double kLogFloor = 1e-12;

/// KL(Q || P) summed over instances. Zero Q entries contribute nothing;
/// entries of P are floored at 1e-12 inside the log. Each entry is summed as
/// q log(q/p) - q + p, which is non-negative term by term and adds nothing
/// when the rows of Q and P both sum to one.
template <typename Scalar>
Scalar kl_divergence(const MatrixX<Scalar>& q, const MatrixX<Scalar>& p) {
  if (q.rows() != p.rows() || q.cols() != p.cols()) throw Error("kl_divergence: shape mismatch");
  if ((p.array() <= Scalar(0)).any()) throw Error("kl_divergence: P must be strictly positive");
  if ((q.array() < Scalar(0)).any()) throw Error("kl_divergence: Q must be non-negative");
  const Scalar floor = static_cast<Scalar>(kLogFloor);
  Scalar total = 0;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const Scalar qv = q(i, j);
      const Scalar pv = p(i, j);
      if (qv == Scalar(0)) {
        total += pv;
        continue;
      }
      const Scalar term = qv * (std::log(std::max(qv, floor)) - std::log(std::max(pv, floor))) - qv + pv;
      total += std::max(term, Scalar(0));
    }
  }
  return total;
}

template <typename Scalar>
struct KlResult {
  Scalar value = 0;
  MatrixX<Scalar> grad_phi;
  MatrixX<Scalar> grad_e;
};

/// KL(Q || P(E, Phi)) with Q held fixed, plus its gradients. With
/// k_ij = (1 + d_ij)^-1 and rq_i = sum_j Q_ij:
///   dL/dd_ij = k_ij (Q_ij - rq_i P_ij)
///   dL/dE_i  =  2 sum_j dL/dd_ij (E_i - Phi_j)
///   dL/dPhi_j = -2 sum_i dL/dd_ij (E_i - Phi_j)
template <typename Scalar>
KlResult<Scalar> kl_loss(const MatrixX<Scalar>& e, const MatrixX<Scalar>& phi,
                         const MatrixX<Scalar>& q) {
  const MatrixX<Scalar> p = soft_assignment(e, phi);
  if (q.rows() != p.rows() || q.cols() != p.cols()) throw Error("kl_loss: Q shape mismatch");
  KlResult<Scalar> out;
  out.value = kl_divergence(q, p);

  const MatrixX<Scalar> kernel = (Scalar(1) + squared_distances(e, phi).array()).inverse().matrix();
  const VectorX<Scalar> q_rows = q.rowwise().sum();
  const MatrixX<Scalar> coeff = kernel.cwiseProduct(q - q_rows.asDiagonal() * p);

  // sum_j coeff_ij (E_i - Phi_j) = rowsum(coeff)_i E_i - (coeff Phi)_i
  const VectorX<Scalar> row_sum = coeff.rowwise().sum();
  const VectorX<Scalar> col_sum = coeff.colwise().sum().transpose();
  out.grad_e = Scalar(2) * (row_sum.asDiagonal() * e - coeff * phi);
  out.grad_phi = Scalar(-2) * (coeff.transpose() * e - col_sum.asDiagonal() * phi);
  return out;
}

template <typename Scalar>
std::vector<int> hard_assignments(const MatrixX<Scalar>& p) {
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    p.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

struct RefineOptions {
  int steps = 1000;
  double lr = 0.1;
  int target_interval = 10;          // steps between recomputations of Q
  double change_tolerance = 0.001;   // stop when fewer assignments change
  bool update_embeddings = true;
  int max_backoff = 30;              // lr halvings allowed per step
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct RefineResult {
  MatrixX<Scalar> centroids;
  MatrixX<Scalar> embeddings;
  std::vector<int> assignments;
  Scalar initial_kl = 0;  // KL(Q0 || P0)
  Scalar final_kl = 0;    // KL of the final P against the target in force
  /// KL before each step under the target in force; `target_refresh`
  /// lists the steps at which a new target took effect.
  std::vector<Scalar> kl_trace;
  std::vector<int> target_refresh;
  int steps_run = 0;
  double final_lr = 0.0;
};

/// Clustering refinement: k-means++ centroids, then gradient descent on the
/// per-instance mean of KL(Q || P) with Q refreshed every
/// `target_interval` steps. A step that would raise the loss under the
/// current Q halves the learning rate and is retried.
template <typename Scalar>
RefineResult<Scalar> refine(const MatrixX<Scalar>& embeddings, int clusters,
                            const RefineOptions& opt = {}) {
  if (embeddings.rows() == 0) throw Error("refine: no unknown embeddings to refine");
  if (opt.target_interval < 1) throw Error("refine: target_interval must be >= 1");

  RefineResult<Scalar> out;
  out.embeddings = embeddings;
  out.centroids = kmeans_init(embeddings, clusters, opt.seed);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(embeddings.rows());

  MatrixX<Scalar> p = soft_assignment(out.embeddings, out.centroids);
  MatrixX<Scalar> q = target_distribution(p);
  out.initial_kl = kl_divergence(q, p);
  std::vector<int> last = hard_assignments(p);
  double lr = opt.lr;

  int step = 0;
  for (; step < opt.steps; ++step) {
    if (step > 0 && step % opt.target_interval == 0) {
      p = soft_assignment(out.embeddings, out.centroids);
      const std::vector<int> now = hard_assignments(p);
      std::size_t changed = 0;
      for (std::size_t i = 0; i < now.size(); ++i) changed += now[i] != last[i];
      last = now;
      if (static_cast<double>(changed) < opt.change_tolerance * static_cast<double>(now.size())) break;
      q = target_distribution(p);
      out.target_refresh.push_back(step);
    }
    const KlResult<Scalar> cur = kl_loss(out.embeddings, out.centroids, q);
    out.kl_trace.push_back(cur.value);
    bool accepted = false;
    for (int attempt = 0; attempt <= opt.max_backoff; ++attempt) {
      const Scalar s = static_cast<Scalar>(lr) * inv_n;
      MatrixX<Scalar> phi_next = out.centroids - s * cur.grad_phi;
      MatrixX<Scalar> e_next = opt.update_embeddings ? MatrixX<Scalar>(out.embeddings - s * cur.grad_e)
                                                     : out.embeddings;
      const Scalar next = kl_divergence(q, soft_assignment(e_next, phi_next));
      if (std::isfinite(static_cast<double>(next)) && next <= cur.value) {
        out.centroids = std::move(phi_next);
        out.embeddings = std::move(e_next);
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
  }

  out.steps_run = step;
  out.final_lr = lr;
  p = soft_assignment(out.embeddings, out.centroids);
  out.final_kl = kl_divergence(q, p);
  out.assignments = hard_assignments(p);
  return out;
}

}  // namespace ucowod
