#pragma once

// Redundancy-reduction objective on pairs of embedding batches:
//
//   C   = (1/n) * norm(Z1)^T norm(Z2)
//   L   = sum_i (1 - C_ii)^2 + lambda * sum_i sum_{j != i} C_ij^2
//
// where norm() standardizes every column over the batch with the population
// std plus kBatchNormEps. Everything is templated on the scalar type so the
// same code serves float pipelines and double-precision gradient checks.

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "agrissl/errors.hpp"

namespace agrissl::twins {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// n x d, one embedding per row.
template <typename Scalar>
using EmbeddingBatch = Matrix<Scalar>;

/// d x d.
template <typename Scalar>
using CrossCorr = Matrix<Scalar>;

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kDefaultLambda = 5e-3;

struct BTLossConfig {
  double lambda = kDefaultLambda;
};

inline void check_config(const BTLossConfig& cfg) {
  if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda)) {
    throw ParameterError("lambda must be a positive finite real");
  }
}

template <typename Derived>
void check_batch(const Eigen::MatrixBase<Derived>& z) {
  if (z.rows() < 2) throw ShapeError("embedding batch needs n >= 2 rows");
  if (z.cols() < 1) throw ShapeError("embedding batch needs d >= 1 columns");
}

/// Population std of every column.
template <typename Derived>
RowVector<typename Derived::Scalar> column_std(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  const RowVector<Scalar> mean = z.colwise().mean();
  const Matrix<Scalar> centered = z.rowwise() - mean;
  return centered.array().square().colwise().mean().sqrt().matrix();
}

/// (z_ij - mean_j) / (std_j + eps) column by column.
template <typename Derived>
Matrix<typename Derived::Scalar> batch_normalize(
    const Eigen::MatrixBase<Derived>& z,
    typename Derived::Scalar eps = typename Derived::Scalar(kBatchNormEps)) {
  using Scalar = typename Derived::Scalar;
  check_batch(z);
  const RowVector<Scalar> mean = z.colwise().mean();
  Matrix<Scalar> centered = z.rowwise() - mean;
  const RowVector<Scalar> denom =
      (centered.array().square().colwise().mean().sqrt() + eps).matrix();
  return centered.array().rowwise() / denom.array();
}

/// Vector-Jacobian product of batch_normalize at `z`.
template <typename Derived, typename DerivedG>
Matrix<typename Derived::Scalar> batch_normalize_backward(
    const Eigen::MatrixBase<Derived>& z, const Eigen::MatrixBase<DerivedG>& grad_out,
    typename Derived::Scalar eps = typename Derived::Scalar(kBatchNormEps)) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = z.rows();
  const RowVector<Scalar> mean = z.colwise().mean();
  const Matrix<Scalar> centered = z.rowwise() - mean;
  const RowVector<Scalar> std = centered.array().square().colwise().mean().sqrt().matrix();

  Matrix<Scalar> grad(n, z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const Scalar denom = std(j) + eps;
    auto gx = grad.col(j);
    gx = grad_out.col(j) / denom;
    if (std(j) > Scalar(0)) {
      // d std / d x_k = x_k / (n std)
      const Scalar dot = grad_out.col(j).dot(centered.col(j));
      gx -= centered.col(j) * (dot / (denom * denom * Scalar(n) * std(j)));
    }
    gx.array() -= gx.mean();
  }
  return grad;
}

template <typename D1, typename D2>
CrossCorr<typename D1::Scalar> cross_correlation(const Eigen::MatrixBase<D1>& z1n,
                                                 const Eigen::MatrixBase<D2>& z2n) {
  using Scalar = typename D1::Scalar;
  if (z1n.rows() != z2n.rows() || z1n.cols() != z2n.cols()) {
    throw ShapeError("cross_correlation: shapes " + std::to_string(z1n.rows()) + "x" +
                     std::to_string(z1n.cols()) + " and " + std::to_string(z2n.rows()) + "x" +
                     std::to_string(z2n.cols()) + " differ");
  }
  return (z1n.transpose() * z2n) / Scalar(z1n.rows());
}

template <typename Derived>
typename Derived::Scalar bt_loss(const Eigen::MatrixBase<Derived>& c, const BTLossConfig& cfg = {}) {
  using Scalar = typename Derived::Scalar;
  if (c.rows() != c.cols()) throw ShapeError("bt_loss: cross-correlation must be square");
  const Scalar invariance = (Scalar(1) - c.diagonal().array()).square().sum();
  const Scalar redundancy = c.array().square().sum() - c.diagonal().array().square().sum();
  return invariance + Scalar(cfg.lambda) * redundancy;
}

/// Invariance and redundancy parts separately (unweighted).
template <typename Derived>
std::pair<typename Derived::Scalar, typename Derived::Scalar> bt_loss_terms(
    const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  const Scalar invariance = (Scalar(1) - c.diagonal().array()).square().sum();
  const Scalar redundancy = c.array().square().sum() - c.diagonal().array().square().sum();
  return {invariance, redundancy};
}

/// dL/dC.
template <typename Derived>
Matrix<typename Derived::Scalar> bt_loss_dc(const Eigen::MatrixBase<Derived>& c,
                                            const BTLossConfig& cfg = {}) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> g = Scalar(2 * cfg.lambda) * c;
  g.diagonal() = Scalar(-2) * (Scalar(1) - c.diagonal().array()).matrix();
  return g;
}

template <typename Scalar>
struct BTLossGrad {
  Matrix<Scalar> grad_z1;
  Matrix<Scalar> grad_z2;
  Scalar loss{};
  CrossCorr<Scalar> c;
};

/// Loss and exact gradient of bt_loss(cross_correlation(norm(Z1), norm(Z2)))
/// with respect to the raw batches.
template <typename D1, typename D2>
BTLossGrad<typename D1::Scalar> bt_loss_grad(const Eigen::MatrixBase<D1>& z1,
                                             const Eigen::MatrixBase<D2>& z2,
                                             const BTLossConfig& cfg = {}) {
  using Scalar = typename D1::Scalar;
  check_batch(z1);
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) {
    throw ShapeError("bt_loss_grad: view batches differ in shape");
  }
  const Matrix<Scalar> z1n = batch_normalize(z1);
  const Matrix<Scalar> z2n = batch_normalize(z2);
  BTLossGrad<Scalar> out;
  out.c = cross_correlation(z1n, z2n);
  out.loss = bt_loss(out.c, cfg);
  const Matrix<Scalar> dc = bt_loss_dc(out.c, cfg) / Scalar(z1.rows());
  // C = z1n^T z2n / n  =>  dL/dz1n = z2n dC^T / n,  dL/dz2n = z1n dC / n
  out.grad_z1 = batch_normalize_backward(z1, z2n * dc.transpose());
  out.grad_z2 = batch_normalize_backward(z2, z1n * dc);
  return out;
}

/// Loss of the full composite, without gradients.
template <typename D1, typename D2>
typename D1::Scalar bt_loss_from_embeddings(const Eigen::MatrixBase<D1>& z1,
                                            const Eigen::MatrixBase<D2>& z2,
                                            const BTLossConfig& cfg = {}) {
  return bt_loss(cross_correlation(batch_normalize(z1), batch_normalize(z2)), cfg);
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Central differences over every entry of Z1 and Z2 against bt_loss_grad;
/// returns the worst relative error. Not clamped: a coarse h reports large
/// errors as they are.
template <typename Scalar>
double finite_diff_check(const Matrix<Scalar>& z1, const Matrix<Scalar>& z2,
                         const BTLossConfig& cfg, double h) {
  if (!(h > 0.0)) throw ParameterError("finite_diff_check: h must be > 0");
  const auto analytic = bt_loss_grad(z1, z2, cfg);
  double worst = 0.0;
  for (int which = 0; which < 2; ++which) {
    Matrix<Scalar> a = z1;
    Matrix<Scalar> b = z2;
    Matrix<Scalar>& target = which == 0 ? a : b;
    const Matrix<Scalar>& grad = which == 0 ? analytic.grad_z1 : analytic.grad_z2;
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
      for (Eigen::Index j = 0; j < target.cols(); ++j) {
        const Scalar saved = target(i, j);
        target(i, j) = saved + Scalar(h);
        const double plus = bt_loss_from_embeddings(a, b, cfg);
        target(i, j) = saved - Scalar(h);
        const double minus = bt_loss_from_embeddings(a, b, cfg);
        target(i, j) = saved;
        const double numeric = (plus - minus) / (2.0 * h);
        worst = std::max(worst, relative_error(static_cast<double>(grad(i, j)), numeric));
      }
    }
  }
  return worst;
}

}  // namespace agrissl::twins
