#pragma once

#include <Eigen/Dense>

#include "pathgan/train/spectral_norm.hpp"

namespace pathgan::train {

/// Orthogonal initialization: the 2-D view (first axis × rest) has
/// orthonormal rows or columns, whichever side is smaller.
inline Tensor orthogonal_init(const Shape& shape, Rng& rng, float gain = 1.0f) {
  Tensor out(shape);
  const auto [rows, cols] = matrix_dims(out);
  const std::int64_t big = std::max(rows, cols), small = std::min(rows, cols);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(big, small);
  for (std::int64_t j = 0; j < small; ++j)
    for (std::int64_t i = 0; i < big; ++i) a(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (std::int64_t j = 0; j < small; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  nn::MapR m(out.data(), rows, cols);
  if (rows >= cols) m = (gain * q).cast<float>();
  else m = (gain * q.transpose()).cast<float>();
  return out;
}

/// Gram matrix over the smaller side of the 2-D view (WᵀW for tall or
/// square views, WWᵀ for wide ones).
inline Eigen::MatrixXd gram_small_side(const Tensor& w) {
  const auto [rows, cols] = matrix_dims(w);
  const Eigen::MatrixXd m = nn::CMapR(w.data(), rows, cols).cast<double>();
  return rows >= cols ? Eigen::MatrixXd(m.transpose() * m) : Eigen::MatrixXd(m * m.transpose());
}

/// Off-diagonal Gram suppression ‖G ⊙ (1 − I)‖²_F, unweighted.
inline double orthogonal_penalty(const Tensor& w) {
  Eigen::MatrixXd g = gram_small_side(w);
  g.diagonal().setZero();
  return g.squaredNorm();
}

/// Adds weight * d(penalty)/dW into grad and returns the weighted penalty.
inline double add_orthogonal_penalty_grad(const Tensor& w, Tensor& grad, double weight) {
  const auto [rows, cols] = matrix_dims(w);
  const Eigen::MatrixXd m = nn::CMapR(w.data(), rows, cols).cast<double>();
  Eigen::MatrixXd g = rows >= cols ? Eigen::MatrixXd(m.transpose() * m) : Eigen::MatrixXd(m * m.transpose());
  g.diagonal().setZero();
  const double penalty = g.squaredNorm();
  if (weight != 0.0) {
    const Eigen::MatrixXd d = rows >= cols ? Eigen::MatrixXd(4.0 * m * g) : Eigen::MatrixXd(4.0 * g * m);
    nn::MapR(grad.data(), rows, cols) += (weight * d).cast<float>();
  }
  return weight * penalty;
}

} // namespace pathgan::train
