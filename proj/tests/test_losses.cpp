#include <gtest/gtest.h>

#include "pathgan/train/losses.hpp"

namespace pathgan::train {
namespace {

using Vec = std::vector<double>;

// Direct transcription of the objective, evaluated in long double.
long double ra_d_oracle(const Vec& r, const Vec& f) {
  long double mr = 0, mf = 0;
  for (double x : r) mr += x;
  for (double x : f) mf += x;
  mr /= r.size();
  mf /= f.size();
  auto sig = [](long double x) { return 1.0L / (1.0L + std::exp(-x)); };
  long double a = 0, b = 0;
  for (double x : r) a -= std::log(sig(x - mf));
  for (double x : f) b -= std::log(1.0L - sig(x - mr));
  return a / r.size() + b / f.size();
}

Vec random_vec(Rng& rng, std::size_t n, double sd = 1.5) {
  std::normal_distribution<double> nd(0.0, sd);
  Vec v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

double rel_err(const Vec& analytic, const Vec& numeric) {
  double diff = 0, norm = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    norm += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

// Central differences of f with respect to one argument vector.
Vec numeric_grad(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-5) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double o = x[i];
    x[i] = o + h;
    const double p = f(x);
    x[i] = o - h;
    const double m = f(x);
    x[i] = o;
    g[i] = (p - m) / (2 * h);
  }
  return g;
}

TEST(Losses, ConstantCriticIsTwoLnTwo) {
  for (double c : {-3.0, 0.0, 0.7, 12.0}) {
    Vec r(5, c), f(7, c);
    EXPECT_NEAR(ra_discriminator_loss(r, f).value, 2 * std::log(2.0), 1e-12);
    EXPECT_NEAR(ra_generator_loss(r, f).value, 2 * std::log(2.0), 1e-12);
  }
}

TEST(Losses, WorkedCase) {
  const Vec r{2, 2}, f{0, 0};
  EXPECT_NEAR(ra_discriminator_loss(r, f).value, 2 * std::log1p(std::exp(-2.0)), 1e-12);
}

TEST(Losses, MatchesOracleOnRandomVectors) {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto r = random_vec(rng, 1 + t % 9), f = random_vec(rng, 1 + (t * 7) % 11);
    EXPECT_NEAR(ra_discriminator_loss(r, f).value, static_cast<double>(ra_d_oracle(r, f)), 1e-12);
    EXPECT_NEAR(ra_generator_loss(r, f).value, static_cast<double>(ra_d_oracle(f, r)), 1e-12);
  }
}

TEST(Losses, GeneratorIsSwappedDiscriminator) {
  Rng rng(3);
  const auto r = random_vec(rng, 6), f = random_vec(rng, 4);
  EXPECT_DOUBLE_EQ(ra_generator_loss(r, f).value, ra_discriminator_loss(f, r).value);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  Rng rng(2024);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const auto r = random_vec(rng, 8), f = random_vec(rng, 8);
    using Fn = std::function<LossGrad(const Vec&, const Vec&)>;
    const std::vector<Fn> fns = {[](const Vec& a, const Vec& b) { return ra_discriminator_loss(a, b); },
                                 [](const Vec& a, const Vec& b) { return ra_generator_loss(a, b); },
                                 [](const Vec& a, const Vec& b) { return hinge_discriminator_loss(a, b); },
                                 [](const Vec& a, const Vec& b) {
                                   auto g = hinge_generator_loss(b);
                                   g.d_real.assign(a.size(), 0.0);
                                   return g;
                                 }};
    for (const auto& fn : fns) {
      const auto lg = fn(r, f);
      const auto nr = numeric_grad([&](const Vec& x) { return fn(x, f).value; }, r);
      const auto nf = numeric_grad([&](const Vec& x) { return fn(r, x).value; }, f);
      Vec a = lg.d_real, n = nr;
      a.insert(a.end(), lg.d_fake.begin(), lg.d_fake.end());
      n.insert(n.end(), nf.begin(), nf.end());
      worst = std::max(worst, rel_err(a, n));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Losses, HingeClosedForms) {
  EXPECT_DOUBLE_EQ(hinge_discriminator_loss(Vec{2, 3}, Vec{-2, -1.5}).value, 0.0);
  EXPECT_DOUBLE_EQ(hinge_discriminator_loss(Vec{0}, Vec{0}).value, 2.0);
  EXPECT_DOUBLE_EQ(hinge_generator_loss(Vec{1, 3}).value, -2.0);
}

TEST(Losses, ExtremeLogitsStayFinite) {
  const Vec r{1e4, -1e4}, f{-1e4, 1e4};
  const auto lg = ra_discriminator_loss(r, f);
  EXPECT_TRUE(std::isfinite(lg.value));
  for (double g : lg.d_real) EXPECT_TRUE(std::isfinite(g));
  EXPECT_LE(lg.value, 2 * -std::log(kLogClamp) + 1e-9);
}

TEST(Losses, EmptyBatchRejected) {
  EXPECT_THROW(ra_discriminator_loss(Vec{}, Vec{1}), ArgumentError);
  EXPECT_THROW(hinge_generator_loss(Vec{}), ArgumentError);
}

TEST(Losses, AutogradWrapperPropagatesGradients) {
  Rng rng(5);
  auto cr = nn::leaf(randn({4, 1}, rng), true), cf = nn::leaf(randn({4, 1}, rng), true);
  auto loss = adversarial_loss(cr, cf, LossKind::RelativisticAverage, LossRole::Discriminator);
  nn::backward(loss);
  Vec r(cr->value.values().begin(), cr->value.values().end()), f(cf->value.values().begin(), cf->value.values().end());
  const auto lg = ra_discriminator_loss(r, f);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(cr->grad[i], lg.d_real[static_cast<std::size_t>(i)], 1e-6);
    EXPECT_NEAR(cf->grad[i], lg.d_fake[static_cast<std::size_t>(i)], 1e-6);
  }
}

TEST(Losses, KindNames) {
  EXPECT_EQ(loss_kind_from_string("hinge"), LossKind::Hinge);
  EXPECT_EQ(loss_kind_from_string(to_string(LossKind::RelativisticAverage)), LossKind::RelativisticAverage);
  EXPECT_THROW(loss_kind_from_string("wgan"), ConfigError);
}

} // namespace
} // namespace pathgan::train
