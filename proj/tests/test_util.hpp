#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "pathgan/core/autograd.hpp"

namespace pathgan::testing_util {

/// Central finite-difference check of d(sum(weights ⊙ f(inputs)))/d(inputs).
/// Returns the worst relative error max|a-n| / max(1, max|n|) over all inputs.
inline double gradient_check(std::vector<nn::Var> inputs, const std::function<nn::Var(const std::vector<nn::Var>&)>& f,
                             std::uint64_t seed = 7, float eps = 1e-2f) {
  Rng rng(seed);
  for (auto& in : inputs) in->requires_grad = true;
  auto out = f(inputs);
  Tensor weights = randn(out->value.shape(), rng);
  auto project = [&](const nn::Var& o) {
    double s = 0.0;
    for (std::int64_t i = 0; i < o->value.numel(); ++i) s += double(o->value[i]) * weights[i];
    return s;
  };
  for (auto& in : inputs) in->grad = Tensor{};
  nn::backward(out, weights);
  double worst = 0.0;
  for (auto& in : inputs) {
    Tensor analytic = in->has_grad() ? in->grad : Tensor::zeros_like(in->value);
    double max_num = 0.0, max_diff = 0.0;
    for (std::int64_t i = 0; i < in->value.numel(); ++i) {
      const float orig = in->value[i];
      in->value[i] = orig + eps;
      double plus;
      double minus;
      {
        nn::NoGradGuard ng;
        plus = project(f(inputs));
        in->value[i] = orig - eps;
        minus = project(f(inputs));
      }
      in->value[i] = orig;
      const double num = (plus - minus) / (2.0 * eps);
      max_num = std::max(max_num, std::abs(num));
      max_diff = std::max(max_diff, std::abs(num - analytic[i]));
    }
    worst = std::max(worst, max_diff / std::max(1.0, max_num));
  }
  return worst;
}

} // namespace pathgan::testing_util
