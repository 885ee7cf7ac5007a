#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "pathgan/core/tensor.hpp"

namespace pathgan::metrics {

struct OneNnResult {
  double accuracy = 0.0;
  /// Per-side count actually used after subsampling.
  Eigen::Index n = 0;
};

/// Leave-one-out 1-NN accuracy on the pooled set [x; y] (x labelled 0, y 1)
/// under Euclidean distance. Ties resolve to the smallest pooled index. The
/// larger side is subsampled with `seed` to the smaller side's size.
inline OneNnResult one_nn_accuracy(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::uint64_t seed = 0) {
  if (x.rows() < 2 || y.rows() < 2) throw ArgumentError("1-NN: each side needs at least 2 rows");
  if (x.cols() != y.cols()) throw ArgumentError("1-NN: dimension mismatch");
  const Eigen::Index n = std::min(x.rows(), y.rows());
  auto take = [&](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
    if (m.rows() == n) return m;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(n));
    std::sort(idx.begin(), idx.end());
    Eigen::MatrixXd out(n, m.cols());
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) = m.row(idx[static_cast<std::size_t>(i)]);
    return out;
  };
  Eigen::MatrixXd pooled(2 * n, x.cols());
  pooled << take(x), take(y);
  const Eigen::Index total = 2 * n;
  // Row-major copy keeps the distance loop contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p = pooled;
  const auto d = p.cols();
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < total; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = -1;
    const double* a = p.data() + i * d;
    for (Eigen::Index j = 0; j < total; ++j) {
      if (j == i) continue;
      const double* b = p.data() + j * d;
      double s = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double t = a[k] - b[k];
        s += t * t;
      }
      if (s < best) {
        best = s;
        arg = j;
      }
    }
    if ((arg < n) == (i < n)) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(total), n};
}

} // namespace pathgan::metrics
