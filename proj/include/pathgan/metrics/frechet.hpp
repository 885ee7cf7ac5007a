#pragma once

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "pathgan/features/feature_matrix.hpp"

namespace pathgan::metrics {

struct FrechetResult {
  double value = 0.0;
  double mean_term = 0.0;
  double trace_term = 0.0;
  bool jittered = false;
};

inline constexpr double kFrechetJitter = 1e-6;
inline constexpr double kNegativeEigenTolerance = 1e-3;

namespace detail {

/// Symmetric PSD square root with eigenvalues clamped at zero.
inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& a, double* min_eigen = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw NumericalError("frechet: eigendecomposition failed");
  if (min_eigen) *min_eigen = es.eigenvalues().minCoeff();
  const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

inline bool near_singular(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  const double hi = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() <= 1e-12 * hi;
}

} // namespace detail

/// ‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2}), with Tr((Σ₁Σ₂)^{1/2}) taken as
/// Tr((Σ₁^{1/2} Σ₂ Σ₁^{1/2})^{1/2}). Near-singular inputs get 1e-6·I on both
/// covariances.
inline FrechetResult frechet_distance_detail(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1,
                                             const Eigen::VectorXd& mu2, const Eigen::MatrixXd& s2) {
  const auto d = mu1.size();
  if (mu2.size() != d || s1.rows() != d || s1.cols() != d || s2.rows() != d || s2.cols() != d)
    throw ArgumentError("frechet: dimension mismatch");
  FrechetResult r;
  Eigen::MatrixXd a = s1, b = s2;
  if (detail::near_singular(a) || detail::near_singular(b)) {
    a.diagonal().array() += kFrechetJitter;
    b.diagonal().array() += kFrechetJitter;
    r.jittered = true;
  }
  const Eigen::MatrixXd ra = detail::sqrt_psd(a);
  Eigen::MatrixXd inner = ra * b * ra;
  inner = 0.5 * (inner + inner.transpose()).eval();
  double min_eig = 0.0;
  const Eigen::MatrixXd root = detail::sqrt_psd(inner, &min_eig);
  const double scale = std::max(1.0, inner.diagonal().cwiseAbs().maxCoeff());
  if (min_eig < -kNegativeEigenTolerance * scale) {
    std::ostringstream os;
    os << "frechet: product has eigenvalue " << min_eig << " below tolerance";
    throw NumericalError(os.str());
  }
  r.mean_term = (mu1 - mu2).squaredNorm();
  r.trace_term = a.trace() + b.trace() - 2.0 * root.trace();
  r.value = r.mean_term + r.trace_term;
  if (!std::isfinite(r.value)) {
    std::ostringstream os;
    os << "frechet: non-finite result (mean term " << r.mean_term << ", trace term " << r.trace_term << ")";
    throw NumericalError(os.str());
  }
  return r;
}

inline double frechet_distance(const features::GaussianFit& g1, const features::GaussianFit& g2) {
  return frechet_distance_detail(g1.mean, g1.cov, g2.mean, g2.cov).value;
}

} // namespace pathgan::metrics
