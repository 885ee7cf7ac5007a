#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "pathgan/core/tensor.hpp"

namespace pathgan::metrics {

/// k(x, y) = (xᵀy / d + 1)³ over the rows of a and b.
inline Eigen::MatrixXd polynomial_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double d = static_cast<double>(a.cols());
  Eigen::MatrixXd k = (a * b.transpose()) / d;
  return (k.array() + 1.0).cube().matrix();
}

/// Unbiased MMD² between the row sets x and y.
inline double mmd2_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const double n = static_cast<double>(x.rows()), m = static_cast<double>(y.rows());
  if (x.rows() < 2 || y.rows() < 2) throw ArgumentError("kid: each side needs at least 2 rows");
  if (x.cols() != y.cols()) throw ArgumentError("kid: dimension mismatch");
  const Eigen::MatrixXd kxx = polynomial_kernel(x, x), kyy = polynomial_kernel(y, y), kxy = polynomial_kernel(x, y);
  const double sxx = kxx.sum() - kxx.trace(), syy = kyy.sum() - kyy.trace();
  return sxx / (n * (n - 1)) + syy / (m * (m - 1)) - 2.0 * kxy.sum() / (n * m);
}

struct KidResult {
  double value = 0.0;
  /// Standard error of the block mean; 0 with a single block.
  double std_error = 0.0;
  int blocks = 1;
  std::vector<double> block_values;
};

/// Block-averaged KID. Both sides are shuffled with `seed` and cut into
/// floor(min(n1, n2) / block_size) disjoint blocks; when fewer than two blocks
/// fit (or block_size <= 0) the full sets form one block.
inline KidResult kid(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int block_size = 100, std::uint64_t seed = 0) {
  if (x.rows() < 2 || y.rows() < 2) throw ArgumentError("kid: each side needs at least 2 rows");
  KidResult r;
  const auto n = std::min(x.rows(), y.rows());
  const Eigen::Index blocks = block_size > 1 ? n / block_size : 0;
  if (blocks < 2) {
    r.value = mmd2_unbiased(x, y);
    r.block_values = {r.value};
    return r;
  }
  Rng rng(seed);
  std::vector<Eigen::Index> px(static_cast<std::size_t>(x.rows())), py(static_cast<std::size_t>(y.rows()));
  std::iota(px.begin(), px.end(), 0);
  std::iota(py.begin(), py.end(), 0);
  std::shuffle(px.begin(), px.end(), rng);
  std::shuffle(py.begin(), py.end(), rng);
  for (Eigen::Index b = 0; b < blocks; ++b) {
    Eigen::MatrixXd bx(block_size, x.cols()), by(block_size, y.cols());
    for (int i = 0; i < block_size; ++i) {
      bx.row(i) = x.row(px[static_cast<std::size_t>(b * block_size + i)]);
      by.row(i) = y.row(py[static_cast<std::size_t>(b * block_size + i)]);
    }
    r.block_values.push_back(mmd2_unbiased(bx, by));
  }
  r.blocks = static_cast<int>(blocks);
  const double k = static_cast<double>(blocks);
  r.value = std::accumulate(r.block_values.begin(), r.block_values.end(), 0.0) / k;
  double ss = 0.0;
  for (double v : r.block_values) ss += (v - r.value) * (v - r.value);
  r.std_error = std::sqrt(ss / (k - 1)) / std::sqrt(k);
  return r;
}

} // namespace pathgan::metrics
