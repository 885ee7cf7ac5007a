#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "pathgan/model/gan.hpp"
#include "reference_shapes.hpp"

namespace pathgan::model {
namespace {

Gan small_gan(std::uint64_t seed = 1) { return Gan::create(ModelConfig::toy(32), seed); }

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::ranges::equal(a.values(), b.values());
}

TEST(Model, ToyConfigsValidate) {
  for (int s : {32, 64, 128}) EXPECT_NO_THROW(ModelConfig::toy(s).validate());
  EXPECT_THROW(ModelConfig::toy(48), ConfigError);
  // Too few stages for a 16×16 attention site in the generator.
  EXPECT_THROW(ModelConfig::toy(16).validate(), ConfigError);
  EXPECT_NO_THROW(ModelConfig::reference224().validate());
  auto bad = ModelConfig::toy(64);
  bad.attention_resolution = 12;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(ModelConfig::reference224().style_layers(), 12);
}

TEST(Model, MapperKeepsLatentDimension) {
  auto g = small_gan();
  const Tensor w = map_latent(g, sample_z(3, 200, 4));
  EXPECT_EQ(w.shape(), (Shape{3, 200}));
  EXPECT_THROW(map_latent(g, sample_z(3, 100, 4)), ConfigError);
}

TEST(Model, StyleMixWithSameLatentIsExactNoOp) {
  auto g = small_gan();
  const Tensor w = map_latent(g, sample_z(2, 200, 5));
  const Tensor base = synthesize(g, w);
  for (int k = 1; k <= g.config.style_layers(); ++k) EXPECT_TRUE(same(synthesize(g, w, &w, k), base)) << k;
}

TEST(Model, CrossoverAtFirstLayerUsesSecondLatentOnly) {
  auto g = small_gan();
  const Tensor w1 = map_latent(g, sample_z(2, 200, 5)), w2 = map_latent(g, sample_z(2, 200, 6));
  EXPECT_TRUE(same(synthesize(g, w1, &w2, 1), synthesize(g, w2)));
  EXPECT_FALSE(same(synthesize(g, w1, &w2, 3), synthesize(g, w2)));
  EXPECT_THROW(synthesize(g, w1, &w2, 0), ArgumentError);
  EXPECT_THROW(synthesize(g, w1, &w2, g.config.style_layers() + 1), ArgumentError);
}

TEST(Model, OutputsLieInOpenUnitInterval) {
  auto g = small_gan();
  Tensor w = map_latent(g, sample_z(4, 200, 7));
  for (auto& v : w.values()) v *= 50.0f;
  const Tensor x = synthesize(g, w);
  EXPECT_EQ(x.shape(), (Shape{4, 3, 32, 32}));
  for (float v : x.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  const Tensor y = synthesize(g, map_latent(g, sample_z(4, 200, 7)));
  for (float v : y.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Model, AttentionAtInitIsIdentity) {
  auto g = small_gan();
  Rng rng(8);
  auto x = nn::constant(randn({2, 32, 16, 16}, rng));
  nn::NoGradGuard ng;
  EXPECT_TRUE(same(self_attention(g.generator.params(), "g.attn", x, 0)->value, x->value));
  const auto c = g.critic.params().raw("c.attn.gamma")->value;
  EXPECT_EQ(c[0], 0.0f);
}

TEST(Model, AttentionRowsAreDistributions) {
  auto g = small_gan();
  Rng rng(9);
  auto x = nn::constant(randn({1, 32, 16, 16}, rng));
  const auto a = attention_weights(g.generator.params(), "g.attn", x, 0);
  EXPECT_EQ(a.rows(), 256);
  EXPECT_LT((a.rowwise().sum().array() - 1.0f).abs().maxCoeff(), 1e-5f);
}

TEST(Model, AdaInPostMomentsMatchStyle) {
  Rng rng(10);
  const double eps = 1e-8;
  Tensor x = randn({2, 3, 8, 8}, rng, 2.0f);
  for (auto& v : x.values()) v += 3.0f;
  Tensor style({2, 6});
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      style[n * 6 + c] = 1.0f;
      style[n * 6 + 3 + c] = 0.0f;
    }
  nn::NoGradGuard ng;
  const Tensor y = nn::adain2d(nn::constant(x), nn::constant(style))->value;
  for (int i = 0; i < 6; ++i) {
    double mu = 0, var = 0;
    for (int j = 0; j < 64; ++j) mu += y[i * 64 + j];
    mu /= 64;
    for (int j = 0; j < 64; ++j) var += (y[i * 64 + j] - mu) * (y[i * 64 + j] - mu);
    EXPECT_LT(std::abs(mu), 10 * eps);
    EXPECT_LT(std::abs(std::sqrt(var / 64) - 1.0), 10 * eps);
  }
}

TEST(Model, CriticScoresAreUnboundedScalars) {
  auto g = small_gan();
  Rng rng(11);
  const Tensor s = critic_scores(g, randn({5, 3, 32, 32}, rng, 10.0f));
  EXPECT_EQ(s.shape(), Shape{5});
  EXPECT_THROW(critic_scores(g, randn({1, 3, 16, 16}, rng)), ConfigError);
}

TEST(Model, InferenceDoesNotMutateSpectralState) {
  auto g = small_gan();
  Rng rng(12);
  const Tensor x = randn({2, 3, 32, 32}, rng);
  const auto before = g.critic.params().entries().at("c.dense1.weight").sn.u;
  const Tensor a = critic_scores(g, x), b = critic_scores(g, x);
  EXPECT_TRUE(same(a, b));
  EXPECT_EQ(g.critic.params().entries().at("c.dense1.weight").sn.u, before);
}

TEST(Model, TrainingForwardAdvancesSpectralState) {
  auto g = small_gan();
  Rng rng(13);
  ForwardOptions opt;
  opt.training = true;
  g.critic.forward(nn::constant(randn({2, 3, 32, 32}, rng)), opt);
  EXPECT_EQ(g.critic.params().entries().at("c.dense1.weight").sn.iterations, 1);
  EXPECT_EQ(g.mapper.params().entries().at("m.out.weight").sn.iterations, 0);
}

TEST(Model, SpectralNormKeepsTopSingularValueNearOne) {
  auto g = small_gan();
  Rng rng(14);
  // Spread the spectrum so the estimate is non-trivial, then iterate as training does.
  g.for_each_store([&](const char*, ParamStore& ps) {
    for (auto& [_, p] : ps.entries())
      if (p.spectral)
        for (auto& v : p.var->value.values()) v += 0.3f * std::normal_distribution<float>()(rng);
  });
  // One power iteration per step, exactly what a training forward applies.
  g.for_each_store([&](const char*, ParamStore& ps) {
    for (auto& [_, p] : ps.entries())
      if (p.spectral)
        for (int i = 0; i < 100; ++i) train::estimate_sigma(p.var->value, p.sn, 1);
  });
  int checked = 0;
  g.for_each_store([&](const char*, ParamStore& ps) {
    for (auto& [name, p] : ps.entries()) {
      if (!p.spectral) continue;
      const Tensor wn = train::spectral_normalize(p.var->value, p.sn, 0);
      const auto [r, c] = train::matrix_dims(wn);
      Eigen::MatrixXd m = nn::CMapR(wn.data(), r, c).cast<double>();
      EXPECT_NEAR(Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0), 1.0, 0.02) << name;
      ++checked;
    }
  });
  EXPECT_GT(checked, 10);
}

TEST(Model, StyleMapsAndMapperAreNotSpectrallyNormalized) {
  auto g = small_gan();
  for (const auto& [name, p] : g.generator.params().entries())
    if (name.find(".style") != std::string::npos) {
      EXPECT_FALSE(p.spectral) << name;
      EXPECT_FALSE(p.orthogonal_reg) << name;
    }
  for (const auto& [name, p] : g.mapper.params().entries()) EXPECT_FALSE(p.spectral) << name;
}

TEST(Model, CreationIsSeedDeterministicAndCloneIsDeep) {
  auto a = small_gan(3), b = small_gan(3), c = small_gan(4);
  const auto& wa = a.critic.params().raw("c.dense1.weight")->value;
  EXPECT_TRUE(same(wa, b.critic.params().raw("c.dense1.weight")->value));
  EXPECT_FALSE(same(wa, c.critic.params().raw("c.dense1.weight")->value));
  auto d = a.clone();
  d.critic.params().raw("c.dense1.weight")->value[0] += 1.0f;
  EXPECT_NE(d.critic.params().raw("c.dense1.weight")->value[0], wa[0]);
}

TEST(Model, GradientsReachEveryTrainableParameter) {
  auto g = small_gan();
  Rng rng(15);
  auto w = g.mapper.forward(nn::constant(randn({2, 200}, rng)));
  auto w2 = g.mapper.forward(nn::constant(randn({2, 200}, rng)));
  auto x = g.generator.forward(w, w2, 4);
  auto s = g.critic.forward(x);
  Tensor seed(s->value.shape(), 1.0f);
  nn::backward(s, seed);
  g.for_each_store([&](const char*, ParamStore& ps) {
    for (auto& [name, p] : ps.entries()) {
      // γ multiplies a zero-initialised branch, but its own gradient is non-zero.
      EXPECT_TRUE(p.var->has_grad()) << name;
    }
  });
}

TEST(Model, ToyShapeTrace) {
  auto g = Gan::create(ModelConfig::toy(64), 2);
  ShapeTrace t;
  synthesize(g, map_latent(g, sample_z(1, 200, 1)), nullptr, 0, &t);
  EXPECT_EQ(t.front().second, (Shape{1, 256}));
  EXPECT_EQ(t.back().second, (Shape{1, 3, 64, 64}));
  ShapeTrace c;
  Rng rng(3);
  critic_scores(g, randn({1, 3, 64, 64}, rng), &c);
  EXPECT_EQ(c.back().second, Shape{1});
}

TEST(Model, Reference224ShapeTrace) {
  auto g = Gan::create(ModelConfig::reference224(), 0);
  ShapeTrace gt;
  const Tensor img = synthesize(g, map_latent(g, sample_z(1, 200, 1)), nullptr, 0, &gt);
  EXPECT_EQ(testing_util::trace_mismatch(gt, testing_util::reference224_generator_trace()), "");
  ShapeTrace ct;
  critic_scores(g, img, &ct);
  EXPECT_EQ(testing_util::trace_mismatch(ct, testing_util::reference224_critic_trace()), "");
}

} // namespace
} // namespace pathgan::model
