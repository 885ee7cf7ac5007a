#pragma once

#include <map>
#include <string>

#include "pathgan/train/orthogonal.hpp"

namespace pathgan::model {

/// One learnable tensor plus its optional spectral-norm state.
struct Param {
  nn::Var var;
  bool spectral = false;
  bool orthogonal_reg = false;
  train::SpectralState sn;
};

/// Named parameters of one network, iterated in name order.
class ParamStore {
public:
  nn::Var add(const std::string& name, Tensor init, bool spectral, bool orthogonal_reg, Rng& rng) {
    if (params_.count(name)) throw ConfigError("duplicate parameter " + name);
    Param p;
    p.spectral = spectral;
    p.orthogonal_reg = orthogonal_reg;
    if (spectral) p.sn = train::make_spectral_state(init.dim(0), rng);
    p.var = nn::leaf(std::move(init), true);
    return params_.emplace(name, std::move(p)).first->second.var;
  }

  const nn::Var& raw(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter " + name);
    return it->second.var;
  }

  /// Weight as used in the forward pass: spectrally normalized when enabled.
  /// `sn_iters` power iterations advance the persistent state (0 in inference).
  nn::Var weight(const std::string& name, int sn_iters) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter " + name);
    Param& p = it->second;
    if (!p.spectral) return p.var;
    return train::spectral_norm(p.var, p.sn, sn_iters);
  }

  std::map<std::string, Param>& entries() { return params_; }
  const std::map<std::string, Param>& entries() const { return params_; }

  void set_requires_grad(bool on) {
    for (auto& [_, p] : params_) p.var->requires_grad = on;
  }

  void zero_grad() {
    for (auto& [_, p] : params_) p.var->grad = Tensor{};
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& [_, p] : params_) n += p.var->value.numel();
    return n;
  }

  /// Deep copy; the copy shares no tensors with the original.
  ParamStore clone() const {
    ParamStore out;
    for (const auto& [name, p] : params_) {
      Param q = p;
      q.var = nn::leaf(p.var->value, p.var->requires_grad);
      out.params_.emplace(name, std::move(q));
    }
    return out;
  }

private:
  std::map<std::string, Param> params_;
};

} // namespace pathgan::model
