#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "pathgan/core/ops.hpp"

namespace pathgan::train {

/// Persistent power-iteration state for one weight: left singular vector
/// estimate u (unit norm) and how many iterations have been applied.
struct SpectralState {
  std::vector<float> u;
  std::int64_t iterations = 0;
};

inline constexpr double kSigmaFloor = 1e-12;

/// Matrix view used by spectral normalization and orthogonal
/// regularization: first axis kept, everything else flattened.
inline std::pair<std::int64_t, std::int64_t> matrix_dims(const Tensor& w) {
  if (w.rank() < 1) throw ArgumentError("weight must have rank >= 1");
  const std::int64_t rows = w.dim(0);
  return {rows, rows ? w.numel() / rows : 0};
}

inline SpectralState make_spectral_state(std::int64_t rows, Rng& rng) {
  SpectralState s;
  s.u.resize(static_cast<std::size_t>(rows));
  std::normal_distribution<double> nd;
  double norm = 0.0;
  std::vector<double> tmp(s.u.size());
  for (auto& v : tmp) {
    v = nd(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < tmp.size(); ++i) s.u[i] = static_cast<float>(tmp[i] / norm);
  return s;
}

struct SpectralEstimate {
  double sigma = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

/// Runs `iters` power iterations (u <- Wv/|Wv|, v <- Wᵀu/|Wᵀu|) updating the
/// state, then returns σ̂ = uᵀWv. With iters == 0 the state is left untouched
/// and σ̂ is evaluated from the stored u.
inline SpectralEstimate estimate_sigma(const Tensor& w, SpectralState& state, int iters) {
  const auto [rows, cols] = matrix_dims(w);
  if (static_cast<std::int64_t>(state.u.size()) != rows)
    throw ConfigError("spectral state size " + std::to_string(state.u.size()) + " does not match weight rows " +
                      std::to_string(rows));
  const Eigen::MatrixXd m = nn::CMapR(w.data(), rows, cols).cast<double>();
  SpectralEstimate e;
  e.u = Eigen::Map<const Eigen::VectorXf>(state.u.data(), rows).cast<double>();
  auto update_v = [&] {
    e.v = m.transpose() * e.u;
    const double nv = e.v.norm();
    if (nv > 0.0) e.v /= nv;
    else e.v.setZero();
  };
  update_v();
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd u = m * e.v;
    const double nu = u.norm();
    if (nu > 0.0) e.u = u / nu;
    update_v();
  }
  if (iters > 0) {
    for (std::int64_t i = 0; i < rows; ++i) state.u[static_cast<std::size_t>(i)] = static_cast<float>(e.u[i]);
    state.iterations += iters;
  }
  e.sigma = e.u.dot(m * e.v);
  return e;
}

/// W / σ̂(W) with σ̂ from persistent power iteration.
inline Tensor spectral_normalize(const Tensor& w, SpectralState& state, int iters) {
  const double sigma = std::max(estimate_sigma(w, state, iters).sigma, kSigmaFloor);
  Tensor out = w;
  for (auto& v : out.values()) v = static_cast<float>(v / sigma);
  return out;
}

/// Differentiable spectral normalization. u and v are treated as constants,
/// so dL/dW = (G - <G, W/σ> u vᵀ) / σ.
inline nn::Var spectral_norm(const nn::Var& w, SpectralState& state, int iters) {
  auto est = std::make_shared<SpectralEstimate>(estimate_sigma(w->value, state, iters));
  const double sigma = std::max(est->sigma, kSigmaFloor);
  Tensor out = w->value;
  for (auto& v : out.values()) v = static_cast<float>(v / sigma);
  return nn::make_op(std::move(out), {w}, [est, sigma](nn::Node& self) {
    auto& W = self.parents[0];
    const auto [rows, cols] = matrix_dims(W->value);
    nn::CMapR g(self.grad.data(), rows, cols);
    nn::CMapR wn(self.value.data(), rows, cols);
    const double inner = (g.cast<double>().cwiseProduct(wn.cast<double>())).sum();
    Eigen::MatrixXd dw = (g.cast<double>() - inner * est->u * est->v.transpose()) / sigma;
    nn::MapR(W->grad_buffer().data(), rows, cols) += dw.cast<float>();
  });
}

} // namespace pathgan::train
