#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "pmatch/error.hpp"

// Contrastive objectives with closed-form gradients. Batches are column
// matrices (embedding_dim x samples). All functions accept Eigen expressions.
namespace pmatch {

template <typename Scalar>
using DynMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedU>& u,
                                            const Eigen::MatrixBase<DerivedV>& v) {
  using Scalar = typename DerivedU::Scalar;
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (nu == Scalar(0) || nv == Scalar(0)) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  if (u.size() != v.size()) throw Error(ErrorCode::DimensionMismatch, "cosine of unequal lengths");
  const Scalar c = u.dot(v) / (nu * nv);
  return std::max(Scalar(-1), std::min(Scalar(1), c));
}

template <typename Scalar>
struct LossValue {
  Scalar value = Scalar(0);
  DynMatrix<Scalar> grad;  // d(value)/d(embeddings), same shape as the input
};

/// Mean NT-Xent over 2N embeddings laid out [view_a | view_b]: the positive
/// of column i is column (i + N) mod 2N. The denominator runs over every
/// other column, positive included. `literal_negative_sign` puts exp(-sim/tau)
/// in the denominator instead.
template <typename Derived>
LossValue<typename Derived::Scalar> nt_xent_loss(const Eigen::MatrixBase<Derived>& embeddings,
                                                 typename Derived::Scalar temperature,
                                                 bool literal_negative_sign = false) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index m = embeddings.cols();
  if (m % 2 != 0) throw Error(ErrorCode::DimensionMismatch, "NT-Xent needs an even number of embeddings");
  const Eigen::Index n = m / 2;
  if (n < 2) throw Error(ErrorCode::BatchTooSmall, "NT-Xent needs N >= 2 pairs");
  if (!(temperature > Scalar(0))) throw Error(ErrorCode::ConfigError, "temperature must be positive");

  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> norms = embeddings.colwise().norm();
  if ((norms.array() == Scalar(0)).any()) throw Error(ErrorCode::ZeroVector, "zero embedding in NT-Xent batch");
  const DynMatrix<Scalar> unit = embeddings * norms.cwiseInverse().asDiagonal();
  const DynMatrix<Scalar> logits = (unit.transpose() * unit) / temperature;
  const Scalar sign = literal_negative_sign ? Scalar(-1) : Scalar(1);

  // logits is symmetric, so column i holds anchor i's row. gt(j, i) is
  // d(loss)/d(logits(i, j)).
  DynMatrix<Scalar> gt(m, m);
  Eigen::Array<Scalar, Eigen::Dynamic, 1> row(m);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index pos = (i + n) % m;
    row = sign * logits.col(i).array();
    row(i) = -std::numeric_limits<Scalar>::infinity();
    const Scalar peak = row.maxCoeff();
    row = (row - peak).exp();
    const Scalar denom = row.sum();
    total += -logits(pos, i) + peak + std::log(denom);
    gt.col(i) = (sign / denom) * row.matrix();
    gt(pos, i) -= Scalar(1);
  }

  LossValue<Scalar> out;
  out.value = total / Scalar(m);
  // logits = U^T U / tau, so dL/dU = U (G + G^T) / tau; then project through
  // the normalization z -> z / |z|.
  const DynMatrix<Scalar> sym = gt + gt.transpose();
  const DynMatrix<Scalar> d_unit = unit * sym / (temperature * Scalar(m));
  out.grad.resize(embeddings.rows(), m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto u = unit.col(i);
    out.grad.col(i) = (d_unit.col(i) - u * u.dot(d_unit.col(i))) / norms(i);
  }
  return out;
}

template <typename Scalar>
struct SimSiamValue {
  Scalar value = Scalar(0);
  DynMatrix<Scalar> grad_p1, grad_p2;
  DynMatrix<Scalar> grad_z1, grad_z2;  // identically zero: z inputs are detached
};

/// Batch mean of 0.5 * (-cos(p1, z2)) + 0.5 * (-cos(p2, z1)), z treated as constants.
template <typename DP1, typename DP2, typename DZ1, typename DZ2>
SimSiamValue<typename DP1::Scalar> simsiam_loss(const Eigen::MatrixBase<DP1>& p1, const Eigen::MatrixBase<DP2>& p2,
                                                const Eigen::MatrixBase<DZ1>& z1, const Eigen::MatrixBase<DZ2>& z2) {
  using Scalar = typename DP1::Scalar;
  if (p1.rows() != z2.rows() || p2.rows() != z1.rows() || p1.cols() != p2.cols() || p1.cols() != z1.cols() ||
      p1.cols() != z2.cols() || p1.rows() != p2.rows())
    throw Error(ErrorCode::DimensionMismatch, "SimSiam inputs must share shape");
  const Eigen::Index b = p1.cols();
  if (b == 0) throw Error(ErrorCode::BatchTooSmall, "empty SimSiam batch");

  auto half_term = [b](const auto& p, const auto& z, DynMatrix<Scalar>& grad) {
    grad.resize(p.rows(), b);
    Scalar sum = 0;
    for (Eigen::Index i = 0; i < b; ++i) {
      const Scalar np = p.col(i).norm();
      const Scalar nz = z.col(i).norm();
      if (np == Scalar(0) || nz == Scalar(0)) throw Error(ErrorCode::ZeroVector, "zero vector in SimSiam batch");
      const Scalar c = p.col(i).dot(z.col(i)) / (np * nz);
      sum += -c;
      // d(-cos)/dp = -(z / (|p||z|) - c p / |p|^2), scaled by 0.5 / b.
      grad.col(i) = -(z.col(i) / (np * nz) - c * p.col(i) / (np * np)) * (Scalar(0.5) / Scalar(b));
    }
    return Scalar(0.5) * sum / Scalar(b);
  };

  SimSiamValue<Scalar> out;
  out.value = half_term(p1, z2, out.grad_p1) + half_term(p2, z1, out.grad_p2);
  out.grad_z1 = DynMatrix<Scalar>::Zero(z1.rows(), b);
  out.grad_z2 = DynMatrix<Scalar>::Zero(z2.rows(), b);
  return out;
}

template <typename Scalar>
struct TripletValue {
  Scalar value = Scalar(0);
  DynMatrix<Scalar> grad_anchor, grad_positive, grad_negative;
};

/// Batch mean of max(0, |a - p|^2 - |a - n|^2 + margin).
template <typename DA, typename DP, typename DN>
TripletValue<typename DA::Scalar> triplet_loss(const Eigen::MatrixBase<DA>& anchor, const Eigen::MatrixBase<DP>& positive,
                                               const Eigen::MatrixBase<DN>& negative, typename DA::Scalar margin) {
  using Scalar = typename DA::Scalar;
  if (anchor.rows() != positive.rows() || anchor.rows() != negative.rows() || anchor.cols() != positive.cols() ||
      anchor.cols() != negative.cols())
    throw Error(ErrorCode::DimensionMismatch, "triplet inputs must share shape");
  const Eigen::Index b = anchor.cols();
  if (b == 0) throw Error(ErrorCode::BatchTooSmall, "empty triplet batch");

  TripletValue<Scalar> out;
  out.grad_anchor = DynMatrix<Scalar>::Zero(anchor.rows(), b);
  out.grad_positive = DynMatrix<Scalar>::Zero(anchor.rows(), b);
  out.grad_negative = DynMatrix<Scalar>::Zero(anchor.rows(), b);
  const Scalar w = Scalar(2) / Scalar(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto dp = (anchor.col(i) - positive.col(i)).eval();
    const auto dn = (anchor.col(i) - negative.col(i)).eval();
    const Scalar hinge = dp.squaredNorm() - dn.squaredNorm() + margin;
    if (hinge <= Scalar(0)) continue;
    out.value += hinge;
    out.grad_anchor.col(i) = w * (dp - dn);
    out.grad_positive.col(i) = -w * dp;
    out.grad_negative.col(i) = w * dn;
  }
  out.value /= Scalar(b);
  return out;
}

}  // namespace pmatch
