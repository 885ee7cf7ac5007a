#pragma once

#include <cstdint>

#include "pathgan/model/networks.hpp"

namespace pathgan::model {

/// Mapper, generator and critic built from one config and seed.
struct Gan {
  ModelConfig config;
  Mapper mapper;
  Generator generator;
  Critic critic;

  static Gan create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    Gan g;
    g.config = cfg;
    g.mapper = Mapper(cfg, rng);
    g.generator = Generator(cfg, rng);
    g.critic = Critic(cfg, rng);
    return g;
  }

  Gan clone() const { return Gan{config, mapper.clone(), generator.clone(), critic.clone()}; }

  /// Visits every parameter store with a stable network tag.
  template <typename F>
  void for_each_store(F&& f) {
    f("mapper", mapper.params());
    f("generator", generator.params());
    f("critic", critic.params());
  }
  template <typename F>
  void for_each_store(F&& f) const {
    f("mapper", mapper.params());
    f("generator", generator.params());
    f("critic", critic.params());
  }
};

/// i.i.d. standard-normal latents [batch, dim], deterministic in seed.
inline Tensor sample_z(std::int64_t batch, int dim, std::uint64_t seed) {
  if (batch < 1) throw ArgumentError("sample_z: batch must be >= 1");
  Rng rng(seed);
  return randn({batch, dim}, rng);
}

inline Tensor map_latent(Gan& gan, const Tensor& z) {
  nn::NoGradGuard ng;
  return gan.mapper.forward(nn::constant(z))->value;
}

/// Images [N,3,S,S]. w2 may be null (single-style path).
inline Tensor synthesize(Gan& gan, const Tensor& w1, const Tensor* w2 = nullptr, int crossover = 0,
                         ShapeTrace* trace = nullptr) {
  nn::NoGradGuard ng;
  ForwardOptions opt;
  opt.trace = trace;
  nn::Var v2 = w2 ? nn::constant(*w2) : nullptr;
  return gan.generator.forward(nn::constant(w1), v2, crossover, opt)->value;
}

inline Tensor critic_scores(Gan& gan, const Tensor& images, ShapeTrace* trace = nullptr) {
  nn::NoGradGuard ng;
  ForwardOptions opt;
  opt.trace = trace;
  return gan.critic.forward(nn::constant(images), opt)->value;
}

/// Convenience: z-seed -> images through mapper and generator.
inline Tensor generate_from_seed(Gan& gan, std::int64_t n, std::uint64_t seed) {
  Tensor w = map_latent(gan, sample_z(n, gan.config.latent_dim, seed));
  return synthesize(gan, w);
}

} // namespace pathgan::model
