#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pathgan/model/config.hpp"
#include "pathgan/model/params.hpp"

namespace pathgan::model {

/// (layer name, output shape) pairs recorded during a forward pass.
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

struct ForwardOptions {
  /// Training forwards advance spectral-norm power iteration once per weight.
  bool training = false;
  ShapeTrace* trace = nullptr;
};

namespace detail {

inline void record(ShapeTrace* trace, std::string name, const nn::Var& v) {
  if (trace) trace->emplace_back(std::move(name), v->value.shape());
}

inline Tensor zeros(Shape s) { return Tensor(std::move(s)); }

inline Shape shape_of(std::initializer_list<int> dims) {
  Shape s;
  for (int d : dims) s.push_back(d);
  return s;
}

/// Adds weight (orthogonal init) + zero bias under `name`.
inline void add_layer(ParamStore& ps, const std::string& name, Shape wshape, std::int64_t bias_size, bool sn,
                      Rng& rng, float gain = 1.0f) {
  ps.add(name + ".weight", train::orthogonal_init(wshape, rng, gain), sn, true, rng);
  if (bias_size > 0) ps.add(name + ".bias", zeros({bias_size}), false, false, rng);
}

/// Style affine map w -> (scale, bias) for one AdaIN site of `channels`.
inline void add_style(ParamStore& ps, const std::string& name, int channels, int latent, float gain, Rng& rng) {
  ps.add(name + ".weight", train::orthogonal_init(shape_of({2 * channels, latent}), rng, gain), false, false, rng);
  Tensor b({2 * static_cast<std::int64_t>(channels)});
  for (int i = 0; i < channels; ++i) b[i] = 1.0f;
  ps.add(name + ".bias", std::move(b), false, false, rng);
}

inline void add_attention(ParamStore& ps, const std::string& name, int channels, bool sn, Rng& rng) {
  const int kc = std::max(1, channels / 8);
  add_layer(ps, name + ".query", shape_of({kc, channels, 1, 1}), kc, sn, rng);
  add_layer(ps, name + ".key", shape_of({kc, channels, 1, 1}), kc, sn, rng);
  add_layer(ps, name + ".value", shape_of({channels, channels, 1, 1}), channels, sn, rng);
  ps.add(name + ".gamma", zeros({1}), false, false, rng);
}

} // namespace detail

/// x + γ·Attn(x); query/key use channels/8 (at least 1), softmax over positions.
inline nn::Var self_attention(ParamStore& ps, const std::string& name, const nn::Var& x, int sn_iters) {
  auto q = nn::conv2d(x, ps.weight(name + ".query.weight", sn_iters), ps.raw(name + ".query.bias"), 1, 0);
  auto k = nn::conv2d(x, ps.weight(name + ".key.weight", sn_iters), ps.raw(name + ".key.bias"), 1, 0);
  auto v = nn::conv2d(x, ps.weight(name + ".value.weight", sn_iters), ps.raw(name + ".value.bias"), 1, 0);
  auto o = nn::attention_core(q, k, v);
  return nn::add(x, nn::scale_by(o, ps.raw(name + ".gamma")));
}

/// Attention map of image `index` ([P, P], rows sum to 1), for inspection.
inline nn::MatR attention_weights(ParamStore& ps, const std::string& name, const nn::Var& x, std::int64_t index) {
  nn::NoGradGuard ng;
  auto q = nn::conv2d(x, ps.weight(name + ".query.weight", 0), ps.raw(name + ".query.bias"), 1, 0);
  auto k = nn::conv2d(x, ps.weight(name + ".key.weight", 0), ps.raw(name + ".key.bias"), 1, 0);
  const auto kc = q->value.dim(1), p = q->value.dim(2) * q->value.dim(3);
  return nn::attention_map(q->value.data() + index * kc * p, k->value.data() + index * kc * p, kc, p);
}

/// z -> w: residual dense blocks x + W2·relu(W1·x + b1) + b2, then one dense layer.
class Mapper {
public:
  Mapper() = default;
  Mapper(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    const int d = cfg.latent_dim;
    for (int i = 0; i < cfg.mapper_blocks; ++i) {
      detail::add_layer(ps_, block(i) + ".fc1", detail::shape_of({d, d}), d, cfg.spectral_norm_mapper, rng);
      detail::add_layer(ps_, block(i) + ".fc2", detail::shape_of({d, d}), d, cfg.spectral_norm_mapper, rng);
    }
    detail::add_layer(ps_, "m.out", detail::shape_of({d, d}), d, cfg.spectral_norm_mapper, rng);
  }

  nn::Var forward(const nn::Var& z, const ForwardOptions& opt = {}) {
    if (z->value.rank() != 2 || z->value.dim(1) != cfg_.latent_dim)
      throw ConfigError("mapper: expected latent [N," + std::to_string(cfg_.latent_dim) + "], got " +
                        shape_str(z->value.shape()));
    const int it = opt.training && cfg_.spectral_norm_mapper ? 1 : 0;
    nn::Var h = z;
    for (int i = 0; i < cfg_.mapper_blocks; ++i) {
      const std::string b = block(i);
      auto inner = nn::relu(nn::dense(h, ps_.weight(b + ".fc1.weight", it), ps_.raw(b + ".fc1.bias")));
      inner = nn::dense(inner, ps_.weight(b + ".fc2.weight", it), ps_.raw(b + ".fc2.bias"));
      h = nn::add(h, inner);
      detail::record(opt.trace, b, h);
    }
    h = nn::dense(h, ps_.weight("m.out.weight", it), ps_.raw("m.out.bias"));
    detail::record(opt.trace, "m.out", h);
    return h;
  }

  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }
  Mapper clone() const {
    Mapper m;
    m.cfg_ = cfg_;
    m.ps_ = ps_.clone();
    return m;
  }

private:
  static std::string block(int i) { return "m.block" + std::to_string(i); }
  ModelConfig cfg_;
  ParamStore ps_;
};

/// Style-conditioned generator w -> image [N,3,S,S] in (0,1).
class Generator {
public:
  Generator() = default;
  Generator(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const bool sn = cfg.spectral_norm_generator;
    const int d = cfg.latent_dim, s = cfg.seed_grid, c0 = cfg.gen_channels[0];
    detail::add_layer(ps_, "g.dense1", detail::shape_of({cfg.gen_dense_width, d}), cfg.gen_dense_width, sn, rng);
    detail::add_style(ps_, "g.dense1.style", cfg.gen_dense_width, d, cfg.style_gain, rng);
    detail::add_layer(ps_, "g.dense2", detail::shape_of({c0 * s * s, cfg.gen_dense_width}), c0 * s * s, sn, rng);
    detail::add_style(ps_, "g.dense2.style", c0, d, cfg.style_gain, rng);
    const int ups = cfg.upsample_stages();
    for (int i = 0; i < ups; ++i) {
      const int c = cfg.gen_channels[static_cast<std::size_t>(i)];
      add_res(res_name(i), c, rng);
      if ((s << i) == cfg.attention_resolution) detail::add_attention(ps_, "g.attn", c, sn, rng);
      const int co = cfg.gen_channels[static_cast<std::size_t>(i + 1)];
      detail::add_layer(ps_, up_name(i + 1), detail::shape_of({c, co, 2, 2}), co, sn, rng);
      detail::add_style(ps_, up_name(i + 1) + ".style", co, d, cfg.style_gain, rng);
    }
    detail::add_layer(ps_, "g.out", detail::shape_of({3, cfg.gen_channels.back(), 3, 3}), 3, sn, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  int style_layers() const { return cfg_.style_layers(); }

  /// Layers with index < crossover receive w1's styles; the rest receive
  /// w2's. Without w2 every layer uses w1.
  nn::Var forward(const nn::Var& w1, const nn::Var& w2, int crossover, const ForwardOptions& opt = {}) {
    if (w1->value.rank() != 2 || w1->value.dim(1) != cfg_.latent_dim)
      throw ConfigError("generator: expected w [N," + std::to_string(cfg_.latent_dim) + "], got " +
                        shape_str(w1->value.shape()));
    if (w2) {
      if (w2->value.shape() != w1->value.shape()) throw ArgumentError("generator: w1/w2 shape mismatch");
      if (crossover < 1 || crossover > style_layers())
        throw ArgumentError("crossover layer " + std::to_string(crossover) + " outside [1, " +
                            std::to_string(style_layers()) + "]");
    }
    const int it = opt.training && cfg_.spectral_norm_generator ? 1 : 0;
    const float slope = cfg_.leaky_slope;
    int layer = 0;
    auto style_w = [&]() -> const nn::Var& {
      ++layer;
      return (w2 && layer >= crossover) ? w2 : w1;
    };
    auto style = [&](const std::string& site, const nn::Var& w) {
      return nn::dense(w, ps_.raw(site + ".weight"), ps_.raw(site + ".bias"));
    };
    const auto n = w1->value.dim(0);

    const nn::Var* w = &style_w();
    auto h = nn::dense(*w, ps_.weight("g.dense1.weight", it), ps_.raw("g.dense1.bias"));
    h = nn::leaky_relu(nn::adain_dense(h, style("g.dense1.style", *w)), slope);
    detail::record(opt.trace, "g.dense1", h);

    w = &style_w();
    h = nn::dense(h, ps_.weight("g.dense2.weight", it), ps_.raw("g.dense2.bias"));
    h = nn::reshape(h, {n, cfg_.gen_channels[0], cfg_.seed_grid, cfg_.seed_grid});
    h = nn::leaky_relu(nn::adain2d(h, style("g.dense2.style", *w)), slope);
    detail::record(opt.trace, "g.dense2", h);

    const int ups = cfg_.upsample_stages();
    for (int i = 0; i < ups; ++i) {
      w = &style_w();
      const std::string rn = res_name(i);
      auto r = nn::conv2d(h, ps_.weight(rn + ".conv1.weight", it), ps_.raw(rn + ".conv1.bias"), 1, 1);
      r = nn::leaky_relu(nn::adain2d(r, style(rn + ".style1", *w)), slope);
      r = nn::conv2d(r, ps_.weight(rn + ".conv2.weight", it), ps_.raw(rn + ".conv2.bias"), 1, 1);
      r = nn::adain2d(r, style(rn + ".style2", *w));
      h = nn::leaky_relu(nn::add(h, r), slope);
      detail::record(opt.trace, rn, h);
      if ((cfg_.seed_grid << i) == cfg_.attention_resolution) {
        h = self_attention(ps_, "g.attn", h, it);
        detail::record(opt.trace, "g.attn", h);
      }
      w = &style_w();
      const std::string un = up_name(i + 1);
      h = nn::conv_transpose2x2(h, ps_.weight(un + ".weight", it), ps_.raw(un + ".bias"));
      h = nn::leaky_relu(nn::adain2d(h, style(un + ".style", *w)), slope);
      detail::record(opt.trace, un, h);
    }
    h = nn::conv2d(h, ps_.weight("g.out.weight", it), ps_.raw("g.out.bias"), 1, 1);
    detail::record(opt.trace, "g.out", h);
    h = nn::sigmoid(h);
    detail::record(opt.trace, "g.sigmoid", h);
    return h;
  }

  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }
  Generator clone() const {
    Generator g;
    g.cfg_ = cfg_;
    g.ps_ = ps_.clone();
    return g;
  }

private:
  static std::string res_name(int i) { return "g.res" + std::to_string(i); }
  static std::string up_name(int i) { return "g.up" + std::to_string(i); }

  void add_res(const std::string& name, int c, Rng& rng) {
    const bool sn = cfg_.spectral_norm_generator;
    detail::add_layer(ps_, name + ".conv1", detail::shape_of({c, c, 3, 3}), c, sn, rng);
    detail::add_style(ps_, name + ".style1", c, cfg_.latent_dim, cfg_.style_gain, rng);
    detail::add_layer(ps_, name + ".conv2", detail::shape_of({c, c, 3, 3}), c, sn, rng);
    detail::add_style(ps_, name + ".style2", c, cfg_.latent_dim, cfg_.style_gain, rng);
  }

  ModelConfig cfg_;
  ParamStore ps_;
};

/// Critic image [N,3,S,S] -> unbounded score [N].
class Critic {
public:
  Critic() = default;
  Critic(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const bool sn = cfg.spectral_norm_critic;
    const int downs = cfg.downsample_stages();
    for (int i = 0; i < downs; ++i) {
      const int c = cfg.critic_channels[static_cast<std::size_t>(i)];
      const int co = cfg.critic_channels[static_cast<std::size_t>(i + 1)];
      const std::string rn = "c.res" + std::to_string(i);
      detail::add_layer(ps_, rn + ".conv1", detail::shape_of({c, c, 3, 3}), c, sn, rng);
      detail::add_layer(ps_, rn + ".conv2", detail::shape_of({c, c, 3, 3}), c, sn, rng);
      if ((cfg.image_size >> i) == cfg.attention_resolution) detail::add_attention(ps_, "c.attn", c, sn, rng);
      detail::add_layer(ps_, "c.down" + std::to_string(i), detail::shape_of({co, c, 2, 2}), co, sn, rng);
    }
    const int g = cfg.critic_final_grid();
    detail::add_layer(ps_, "c.dense1", detail::shape_of({cfg.critic_dense_width, cfg.critic_channels.back() * g * g}),
                      cfg.critic_dense_width, sn, rng);
    detail::add_layer(ps_, "c.dense2", detail::shape_of({1, cfg.critic_dense_width}), 1, sn, rng);
  }

  const ModelConfig& config() const { return cfg_; }

  nn::Var forward(const nn::Var& x, const ForwardOptions& opt = {}) {
    const auto& s = x->value.shape();
    if (s.size() != 4 || s[1] != 3 || s[2] != cfg_.image_size || s[3] != cfg_.image_size)
      throw ConfigError("critic: expected [N,3," + std::to_string(cfg_.image_size) + "," +
                        std::to_string(cfg_.image_size) + "], got " + shape_str(s));
    const int it = opt.training && cfg_.spectral_norm_critic ? 1 : 0;
    const float slope = cfg_.leaky_slope;
    nn::Var h = x;
    for (int i = 0; i < cfg_.downsample_stages(); ++i) {
      const std::string rn = "c.res" + std::to_string(i);
      auto r = nn::leaky_relu(nn::conv2d(h, ps_.weight(rn + ".conv1.weight", it), ps_.raw(rn + ".conv1.bias"), 1, 1),
                              slope);
      r = nn::conv2d(r, ps_.weight(rn + ".conv2.weight", it), ps_.raw(rn + ".conv2.bias"), 1, 1);
      h = nn::leaky_relu(nn::add(h, r), slope);
      detail::record(opt.trace, rn, h);
      if ((cfg_.image_size >> i) == cfg_.attention_resolution) {
        h = self_attention(ps_, "c.attn", h, it);
        detail::record(opt.trace, "c.attn", h);
      }
      const std::string dn = "c.down" + std::to_string(i);
      h = nn::leaky_relu(nn::conv2d(h, ps_.weight(dn + ".weight", it), ps_.raw(dn + ".bias"), 2, 0), slope);
      detail::record(opt.trace, dn, h);
    }
    const auto n = s[0];
    h = nn::reshape(h, {n, h->value.numel() / n});
    detail::record(opt.trace, "c.flatten", h);
    h = nn::leaky_relu(nn::dense(h, ps_.weight("c.dense1.weight", it), ps_.raw("c.dense1.bias")), slope);
    detail::record(opt.trace, "c.dense1", h);
    h = nn::dense(h, ps_.weight("c.dense2.weight", it), ps_.raw("c.dense2.bias"));
    h = nn::reshape(h, {n});
    detail::record(opt.trace, "c.dense2", h);
    return h;
  }

  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }
  Critic clone() const {
    Critic c;
    c.cfg_ = cfg_;
    c.ps_ = ps_.clone();
    return c;
  }

private:
  ModelConfig cfg_;
  ParamStore ps_;
};

} // namespace pathgan::model
