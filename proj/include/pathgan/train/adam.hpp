#pragma once

#include <cmath>
#include <map>
#include <string>

#include "pathgan/model/params.hpp"

namespace pathgan::train {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over one or more parameter stores. Parameters without
/// a gradient this step are left untouched (their moments do not decay).
class Adam {
public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(std::initializer_list<model::ParamStore*> stores) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto lr = cfg_.learning_rate, b1 = cfg_.beta1, b2 = cfg_.beta2, eps = cfg_.eps;
    for (auto* ps : stores)
      for (auto& [name, p] : ps->entries()) {
        if (!p.var->has_grad()) continue;
        auto& st = state_[name];
        const auto n = static_cast<std::size_t>(p.var->value.numel());
        if (st.m.size() != n) {
          st.m.assign(n, 0.0f);
          st.v.assign(n, 0.0f);
        }
        float* w = p.var->value.data();
        const float* g = p.var->grad.data();
        for (std::size_t i = 0; i < n; ++i) {
          st.m[i] = static_cast<float>(b1 * st.m[i] + (1 - b1) * g[i]);
          st.v[i] = static_cast<float>(b2 * st.v[i] + (1 - b2) * double(g[i]) * g[i]);
          const double mhat = st.m[i] / c1, vhat = st.v[i] / c2;
          w[i] = static_cast<float>(w[i] - lr * mhat / (std::sqrt(vhat) + eps));
        }
      }
  }

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

private:
  struct Moments {
    std::vector<float> m, v;
  };
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> state_;
};

} // namespace pathgan::train
