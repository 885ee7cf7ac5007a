#pragma once

// Adversarial objectives on raw critic outputs C(x).

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pathgan/core/autograd.hpp"

namespace pathgan::train {

enum class LossKind { RelativisticAverage, Hinge };

inline std::string to_string(LossKind k) {
  return k == LossKind::Hinge ? "hinge" : "relativistic-average";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "relativistic-average" || s == "ra") return LossKind::RelativisticAverage;
  if (s == "hinge") return LossKind::Hinge;
  throw ConfigError("unknown loss kind '" + s + "'");
}

/// Loss value with its gradient w.r.t. every critic output.
struct LossGrad {
  double value = 0.0;
  std::vector<double> d_real;
  std::vector<double> d_fake;
};

inline constexpr double kLogClamp = 1e-12;

namespace detail {

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// -log(clamp(sigmoid(-x), 1e-12)) and its derivative in x.
inline std::pair<double, double> neg_log_sigmoid_neg(double x) {
  const double cap = -std::log(kLogClamp);
  const double sp = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  if (sp >= cap) return {cap, 0.0};
  return {sp, sigmoid(x)};
}

inline void require_nonempty(std::span<const double> a, const char* what) {
  if (a.empty()) throw ArgumentError(std::string(what) + ": empty critic batch");
}

} // namespace detail

/// L = -E_r log σ(C(x_r) - E_f C) - E_f log(1 - σ(C(x_f) - E_r C)).
inline LossGrad ra_discriminator_loss(std::span<const double> c_real, std::span<const double> c_fake) {
  detail::require_nonempty(c_real, "ra_discriminator_loss");
  detail::require_nonempty(c_fake, "ra_discriminator_loss");
  const double nr = double(c_real.size()), nf = double(c_fake.size());
  const double mr = detail::mean(c_real), mf = detail::mean(c_fake);
  LossGrad out;
  out.d_real.resize(c_real.size());
  out.d_fake.resize(c_fake.size());
  double sum_ga = 0.0, sum_gb = 0.0;
  for (std::size_t i = 0; i < c_real.size(); ++i) {
    // -log σ(a) = softplus(-a)
    auto [v, d] = detail::neg_log_sigmoid_neg(-(c_real[i] - mf));
    out.value += v / nr;
    out.d_real[i] = -d / nr;
    sum_ga += out.d_real[i];
  }
  for (std::size_t j = 0; j < c_fake.size(); ++j) {
    // -log(1 - σ(b)) = softplus(b)
    auto [v, d] = detail::neg_log_sigmoid_neg(c_fake[j] - mr);
    out.value += v / nf;
    out.d_fake[j] = d / nf;
    sum_gb += out.d_fake[j];
  }
  for (auto& g : out.d_real) g -= sum_gb / nr;
  for (auto& g : out.d_fake) g -= sum_ga / nf;
  return out;
}

/// Generator counterpart: the discriminator loss with real and fake swapped.
inline LossGrad ra_generator_loss(std::span<const double> c_real, std::span<const double> c_fake) {
  LossGrad swapped = ra_discriminator_loss(c_fake, c_real);
  LossGrad out;
  out.value = swapped.value;
  out.d_real = std::move(swapped.d_fake);
  out.d_fake = std::move(swapped.d_real);
  return out;
}

/// L_D = E max(0, 1 - C_r) + E max(0, 1 + C_f).
inline LossGrad hinge_discriminator_loss(std::span<const double> c_real, std::span<const double> c_fake) {
  detail::require_nonempty(c_real, "hinge_discriminator_loss");
  detail::require_nonempty(c_fake, "hinge_discriminator_loss");
  const double nr = double(c_real.size()), nf = double(c_fake.size());
  LossGrad out;
  out.d_real.resize(c_real.size());
  out.d_fake.resize(c_fake.size());
  for (std::size_t i = 0; i < c_real.size(); ++i) {
    const double m = 1.0 - c_real[i];
    if (m > 0) {
      out.value += m / nr;
      out.d_real[i] = -1.0 / nr;
    }
  }
  for (std::size_t j = 0; j < c_fake.size(); ++j) {
    const double m = 1.0 + c_fake[j];
    if (m > 0) {
      out.value += m / nf;
      out.d_fake[j] = 1.0 / nf;
    }
  }
  return out;
}

/// L_G = -E C_f.
inline LossGrad hinge_generator_loss(std::span<const double> c_fake) {
  detail::require_nonempty(c_fake, "hinge_generator_loss");
  LossGrad out;
  out.value = -detail::mean(c_fake);
  out.d_fake.assign(c_fake.size(), -1.0 / double(c_fake.size()));
  return out;
}

enum class LossRole { Discriminator, Generator };

/// Autograd wrapper: critic output vectors (any shape, flattened) -> scalar.
inline nn::Var adversarial_loss(const nn::Var& c_real, const nn::Var& c_fake, LossKind kind, LossRole role) {
  std::vector<double> r(c_real->value.values().begin(), c_real->value.values().end());
  std::vector<double> f(c_fake->value.values().begin(), c_fake->value.values().end());
  LossGrad lg;
  if (kind == LossKind::RelativisticAverage)
    lg = role == LossRole::Discriminator ? ra_discriminator_loss(r, f) : ra_generator_loss(r, f);
  else if (role == LossRole::Discriminator)
    lg = hinge_discriminator_loss(r, f);
  else {
    lg = hinge_generator_loss(f);
    lg.d_real.assign(r.size(), 0.0);
  }
  Tensor value({1}, static_cast<float>(lg.value));
  auto grads = std::make_shared<LossGrad>(std::move(lg));
  auto out = nn::make_op(std::move(value), {c_real, c_fake}, [grads](nn::Node& self) {
    const double s = self.grad[0];
    for (int side = 0; side < 2; ++side) {
      auto& p = self.parents[side];
      if (!nn::needs_grad(p)) continue;
      const auto& d = side == 0 ? grads->d_real : grads->d_fake;
      float* g = p->grad_buffer().data();
      for (std::size_t i = 0; i < d.size(); ++i) g[i] += static_cast<float>(s * d[i]);
    }
  });
  return out;
}

/// Exact double-precision loss value, kept alongside the float tensor.
inline double loss_value(std::span<const double> c_real, std::span<const double> c_fake, LossKind kind,
                         LossRole role) {
  if (kind == LossKind::RelativisticAverage)
    return role == LossRole::Discriminator ? ra_discriminator_loss(c_real, c_fake).value
                                           : ra_generator_loss(c_real, c_fake).value;
  return role == LossRole::Discriminator ? hinge_discriminator_loss(c_real, c_fake).value
                                         : hinge_generator_loss(c_fake).value;
}

} // namespace pathgan::train
