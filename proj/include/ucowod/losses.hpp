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

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Core>

#include "ucowod/types.hpp"

namespace ucowod {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Column layout of a logit row: [known 0..C) [unknown slots C..C+U) [background].
struct HeadLayout {
  int known_count = 0;
  int unknown_slots = 0;

  int width() const { return known_count + unknown_slots + 1; }
  int background_index() const { return known_count + unknown_slots; }
};

template <typename Scalar>
struct LossResult {
  Scalar value = 0;
  MatrixX<Scalar> gradient;
  /// Set when the loss had nothing to average over (reported as 0).
  bool empty_selection = false;
};

// ---------------------------------------------------------------------------
// Unknown-discriminative classification loss.
//
// Known and background rows: softmax cross-entropy over the full head with
// the target on their own slot. Unknown (pseudo) rows: -log of the largest
// unknown-slot probability, obtained by pushing every other unknown logit to
// `mask_value` before the softmax. Masked logits receive zero gradient.
// ---------------------------------------------------------------------------
template <typename Scalar>
LossResult<Scalar> ucls_loss(const MatrixX<Scalar>& logits, std::span<const ClassLabel> labels,
                             const HeadLayout& layout, Scalar mask_value = Scalar(-1e4)) {
  const Eigen::Index n = logits.rows();
  if (n == 0) throw Error("ucls_loss: empty batch");
  if (logits.cols() != layout.width()) throw Error("ucls_loss: logit width does not match head layout");
  if (static_cast<Eigen::Index>(labels.size()) != n) throw Error("ucls_loss: label count mismatch");

  const int c = layout.known_count;
  const int u = layout.unknown_slots;
  LossResult<Scalar> out;
  out.gradient = MatrixX<Scalar>::Zero(n, logits.cols());
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const ClassLabel& label = labels[static_cast<std::size_t>(i)];
    VectorX<Scalar> z = logits.row(i).transpose();
    Eigen::Index target = 0;
    std::vector<Eigen::Index> masked;
    switch (label.kind()) {
      case ClassLabel::Kind::Known:
        if (label.id() >= c) throw Error("ucls_loss: known id outside [0, C)");
        target = label.id();
        break;
      case ClassLabel::Kind::Background:
        target = layout.background_index();
        break;
      case ClassLabel::Kind::Unknown: {
        if (u == 0) throw Error("ucls_loss: unknown row but the head has no unknown slots");
        z.segment(c, u).maxCoeff(&target);
        target += c;
        for (Eigen::Index s = c; s < c + u; ++s) {
          if (s != target) {
            z(s) = mask_value;
            masked.push_back(s);
          }
        }
        break;
      }
    }
    const Scalar zmax = z.maxCoeff();
    const VectorX<Scalar> ez = (z.array() - zmax).exp().matrix();
    const Scalar denom = ez.sum();
    const Scalar log_p = z(target) - zmax - std::log(denom);
    out.value -= log_p;
    VectorX<Scalar> g = ez / denom;
    g(target) -= Scalar(1);
    for (Eigen::Index s : masked) g(s) = 0;
    out.gradient.row(i) = g.transpose() * inv_n;
  }
  out.value *= inv_n;
  return out;
}

// ---------------------------------------------------------------------------
// Cosine similarity between embedding rows.
// ---------------------------------------------------------------------------
template <typename Scalar>
VectorX<Scalar> row_norms_checked(const MatrixX<Scalar>& e) {
  VectorX<Scalar> norms = e.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > Scalar(0))) {
      throw Error("similarity_matrix: embedding row " + std::to_string(i) + " has zero norm");
    }
  }
  return norms;
}

/// Raw cosine matrix, in [-1, 1].
template <typename Scalar>
MatrixX<Scalar> cosine_matrix(const MatrixX<Scalar>& e) {
  const VectorX<Scalar> norms = row_norms_checked(e);
  const MatrixX<Scalar> unit = norms.cwiseInverse().asDiagonal() * e;
  return unit * unit.transpose();
}

/// Cosine matrix clamped into [eps, 1 - eps] so binary cross-entropy stays finite.
template <typename Scalar>
MatrixX<Scalar> similarity_matrix(const MatrixX<Scalar>& e, Scalar eps = Scalar(1e-6)) {
  return cosine_matrix(e).cwiseMax(eps).cwiseMin(Scalar(1) - eps);
}

/// Pulls dL/dS back to dL/dE through the clamp and the row normalisation.
/// Clamped entries (including the diagonal) pass no gradient.
template <typename Scalar>
MatrixX<Scalar> similarity_backward(const MatrixX<Scalar>& e, const MatrixX<Scalar>& grad_s,
                                    Scalar eps = Scalar(1e-6)) {
  const VectorX<Scalar> norms = row_norms_checked(e);
  const MatrixX<Scalar> unit = norms.cwiseInverse().asDiagonal() * e;
  const MatrixX<Scalar> cos = unit * unit.transpose();
  const MatrixX<Scalar> pass =
      (cos.array() > eps && cos.array() < Scalar(1) - eps).template cast<Scalar>().matrix();
  const MatrixX<Scalar> g = grad_s.cwiseProduct(pass);
  const MatrixX<Scalar> grad_unit = (g + g.transpose()) * unit;
  // Project out the radial component: d(u)/d(e) = (I - u u^T) / |e|.
  const VectorX<Scalar> radial = grad_unit.cwiseProduct(unit).rowwise().sum();
  return norms.cwiseInverse().asDiagonal() * (grad_unit - radial.asDiagonal() * unit);
}

// ---------------------------------------------------------------------------
// Pair label matrices. Entries are +1 (similar), -1 (dissimilar) and
// 0 (pair not selected). The same encoding serves M, the self-labeled
// matrix and the combined matrix.
// ---------------------------------------------------------------------------
enum PairLabel : std::int8_t { kNotSelected = 0, kPositive = 1, kNegative = -1 };

using PairLabelMatrix = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Supervised pair labels: unknown-unknown pairs are not selected, equal
/// labels are similar, anything else is dissimilar.
inline PairLabelMatrix supervised_label_matrix(std::span<const ClassLabel> labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  PairLabelMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const ClassLabel& a = labels[static_cast<std::size_t>(i)];
      const ClassLabel& b = labels[static_cast<std::size_t>(j)];
      if (a.is_unknown() && b.is_unknown()) {
        m(i, j) = kNotSelected;
      } else {
        m(i, j) = a == b ? kPositive : kNegative;
      }
    }
  }
  return m;
}

/// Dynamic similarity thresholds TH(l) = th0 + th_slope*l, TL(l) = tl0 + tl_slope*l.
struct ThresholdSchedule {
  double th_intercept = 0.95;
  double th_slope = -1.0;
  double tl_intercept = 0.455;
  double tl_slope = 0.1;

  double upper(double lambda) const { return th_intercept + th_slope * lambda; }
  double lower(double lambda) const { return tl_intercept + tl_slope * lambda; }
  /// Sample-count penalty TH - TL.
  double penalty(double lambda) const { return upper(lambda) - lower(lambda); }
  double penalty_slope() const { return th_slope - tl_slope; }
  bool terminated(double lambda) const { return upper(lambda) <= lower(lambda); }
};

class SelfSupervisionTerminated : public Error {
 public:
  SelfSupervisionTerminated() : Error("self-supervision terminated: TH(lambda) <= TL(lambda)") {}
};

/// Confident unknown-unknown pairs: +1 above TH, -1 below TL, 0 otherwise
/// and for every pair that is not unknown-unknown.
template <typename Scalar>
PairLabelMatrix self_label_matrix(const MatrixX<Scalar>& s, std::span<const ClassLabel> labels,
                                  double lambda, const ThresholdSchedule& schedule = {}) {
  if (schedule.terminated(lambda)) throw SelfSupervisionTerminated();
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (s.rows() != n || s.cols() != n) throw Error("self_label_matrix: size mismatch");
  const double hi = schedule.upper(lambda);
  const double lo = schedule.lower(lambda);
  PairLabelMatrix m = PairLabelMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!labels[static_cast<std::size_t>(i)].is_unknown()) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!labels[static_cast<std::size_t>(j)].is_unknown()) continue;
      const double v = static_cast<double>(s(i, j));
      if (v > hi) {
        m(i, j) = kPositive;
      } else if (v < lo) {
        m(i, j) = kNegative;
      }
    }
  }
  return m;
}

/// Supervised labels for pairs involving a labeled row, self labels for
/// unknown-unknown pairs.
inline PairLabelMatrix combined_label_matrix(const PairLabelMatrix& self_labels,
                                             std::span<const ClassLabel> labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (self_labels.rows() != n || self_labels.cols() != n) {
    throw Error("combined_label_matrix: size mismatch");
  }
  PairLabelMatrix m = supervised_label_matrix(labels);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (self_labels(i, j) > 0) {
        m(i, j) = kPositive;
      } else if (self_labels(i, j) < 0 && m(i, j) != kPositive) {
        m(i, j) = kNegative;
      }
    }
  }
  return m;
}

/// Mean binary cross-entropy over selected pairs, treating every entry of S
/// as its own variable. S must already be clamped into (0,1).
template <typename Scalar>
LossResult<Scalar> sim_loss(const PairLabelMatrix& labels, const MatrixX<Scalar>& s) {
  if (labels.rows() != s.rows() || labels.cols() != s.cols()) throw Error("sim_loss: size mismatch");
  LossResult<Scalar> out;
  out.gradient = MatrixX<Scalar>::Zero(s.rows(), s.cols());
  Eigen::Index count = 0;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      if (labels(i, j) == kNotSelected) continue;
      const Scalar v = s(i, j);
      if (!(v > Scalar(0) && v < Scalar(1))) throw Error("sim_loss: similarity outside (0,1)");
      ++count;
      if (labels(i, j) == kPositive) {
        out.value -= std::log(v);
        out.gradient(i, j) = -Scalar(1) / v;
      } else {
        out.value -= std::log1p(-v);
        out.gradient(i, j) = Scalar(1) / (Scalar(1) - v);
      }
    }
  }
  if (count == 0) {
    out.empty_selection = true;
    return out;
  }
  const Scalar inv = Scalar(1) / static_cast<Scalar>(count);
  out.value *= inv;
  out.gradient *= inv;
  return out;
}

/// sim_loss over the combined labels plus the penalty TH - TL. The penalty
/// does not depend on S and leaves the gradient untouched.
template <typename Scalar>
LossResult<Scalar> self_sim_loss(const PairLabelMatrix& labels, const MatrixX<Scalar>& s,
                                 double lambda, const ThresholdSchedule& schedule = {}) {
  LossResult<Scalar> out = sim_loss(labels, s);
  out.value += static_cast<Scalar>(schedule.penalty(lambda));
  return out;
}

/// One gradient step on the penalty: lambda - eta * d(TH - TL)/d(lambda).
inline double update_lambda(double lambda, double eta, const ThresholdSchedule& schedule = {}) {
  if (eta < 0.0) throw Error("update_lambda: eta must be non-negative");
  return lambda - eta * schedule.penalty_slope();
}

/// Mean absolute error over all coordinates; subgradient 0 at exact ties.
template <typename Scalar>
LossResult<Scalar> l1_reg_loss(const MatrixX<Scalar>& pred, const MatrixX<Scalar>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw Error("l1_reg_loss: shape mismatch");
  }
  LossResult<Scalar> out;
  out.gradient = MatrixX<Scalar>::Zero(pred.rows(), pred.cols());
  if (pred.size() == 0) {
    out.empty_selection = true;
    return out;
  }
  const MatrixX<Scalar> diff = pred - target;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(diff.size());
  out.value = diff.cwiseAbs().sum() * inv;
  out.gradient = diff.unaryExpr([inv](Scalar d) {
    return d > Scalar(0) ? inv : (d < Scalar(0) ? -inv : Scalar(0));
  });
  return out;
}

struct LossWeights {
  double rpn = 1.0;  // kept for configuration parity; there is no RPN term
  double cls = 1.0;
  double reg = 1.0;
  double sim = 0.5;
};

struct LossParts {
  double ucls = 0.0;
  double reg = 0.0;
  double sim = 0.0;
};

inline double total_training_loss(const LossParts& parts, const LossWeights& w) {
  return w.cls * parts.ucls + w.reg * parts.reg + w.sim * parts.sim;
}

}  // namespace ucowod
