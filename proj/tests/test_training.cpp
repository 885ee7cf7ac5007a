#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "pathgan/data/synth.hpp"
#include "pathgan/train/trainer.hpp"

namespace pathgan::train {
namespace {

namespace fs = std::filesystem;

std::vector<Image> toy_images(std::int64_t n, std::uint64_t seed = 5) {
  data::SynthOptions o;
  o.n = n;
  o.image_size = 32;
  o.seed = seed;
  return data::images_of(data::synth_toy_patches(o));
}

TrainConfig small_config() {
  TrainConfig c;
  c.model = model::ModelConfig::toy(32);
  c.batch_size = 4;
  c.epochs = 1;
  c.seed = 11;
  c.checkpoint_every = 0;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("pathgan-train-" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  return d;
}

TEST(Trainer, StepAccountingFollowsBatchesPerEpoch) {
  auto cfg = small_config();
  cfg.epochs = 2;
  // 18 images, b = 4: ceil(18/4) = 5 critic updates per epoch.
  Trainer t(model::Gan::create(cfg.model, 1), cfg);
  const auto sums = t.train(toy_images(18));
  ASSERT_EQ(sums.size(), 2u);
  EXPECT_EQ(sums[0].critic_steps, 5);
  EXPECT_EQ(sums[0].generator_steps, 1);
  EXPECT_EQ(sums[1].critic_steps, 10);
  EXPECT_EQ(sums[1].generator_steps, 2);
  ASSERT_EQ(t.log().size(), 2u);
  EXPECT_EQ(t.log()[1].step, 2);
}

TEST(Trainer, GeneratorCadenceCarriesAcrossEpochs) {
  auto cfg = small_config();
  cfg.epochs = 3;
  // 3 batches per epoch. Batches queue until 5 are available, so the first
  // round of critic updates and its generator update run mid epoch 2.
  Trainer t(model::Gan::create(cfg.model, 1), cfg);
  const auto sums = t.train(toy_images(12));
  EXPECT_EQ(sums[0].critic_steps, 0);
  EXPECT_EQ(sums[0].generator_steps, 0);
  EXPECT_EQ(sums[1].critic_steps, 5);
  EXPECT_EQ(sums[1].generator_steps, 1);
  EXPECT_EQ(sums[2].critic_steps, 5);
  EXPECT_EQ(sums[2].generator_steps, 1);
}

TEST(Trainer, SeededRunsAreIdentical) {
  auto cfg = small_config();
  const auto images = toy_images(20);
  Trainer a(model::Gan::create(cfg.model, 3), cfg), b(model::Gan::create(cfg.model, 3), cfg);
  a.train(images);
  b.train(images);
  ASSERT_EQ(a.log().size(), b.log().size());
  for (std::size_t i = 0; i < a.log().size(); ++i) EXPECT_TRUE(a.log()[i].same_trajectory(b.log()[i]));
  EXPECT_EQ(model::weights_digest(a.gan()), model::weights_digest(b.gan()));

  cfg.seed = 12;
  Trainer c(model::Gan::create(cfg.model, 3), cfg);
  c.train(images);
  EXPECT_NE(model::weights_digest(a.gan()), model::weights_digest(c.gan()));
}

TEST(Trainer, TrainingMovesAllThreeNetworks) {
  auto cfg = small_config();
  auto init = model::Gan::create(cfg.model, 4);
  Trainer t(init.clone(), cfg);
  t.train(toy_images(20));
  auto changed = [](const model::ParamStore& a, const model::ParamStore& b) {
    for (const auto& [name, p] : a.entries())
      if (!std::ranges::equal(p.var->value.values(), b.entries().at(name).var->value.values())) return true;
    return false;
  };
  EXPECT_TRUE(changed(init.mapper.params(), t.gan().mapper.params()));
  EXPECT_TRUE(changed(init.generator.params(), t.gan().generator.params()));
  EXPECT_TRUE(changed(init.critic.params(), t.gan().critic.params()));
  EXPECT_GT(t.log().back().ortho, 0.0);
  EXPECT_TRUE(std::isfinite(t.log().back().l_dis));
}

TEST(Trainer, FidHookSeesSnapshotOnly) {
  auto cfg = small_config();
  cfg.fid_every = 1;
  const auto images = toy_images(20);
  Trainer plain(model::Gan::create(cfg.model, 6), cfg);
  plain.train(images);

  Trainer hooked(model::Gan::create(cfg.model, 6), cfg);
  int calls = 0;
  hooked.set_fid_hook([&](model::Gan& g) {
    ++calls;
    // Scribbling on the snapshot must not leak into the live model.
    for (auto& [_, p] : g.generator.params().entries()) p.var->value.fill(0.0f);
    return 1.5;
  });
  const auto sums = hooked.train(images);
  EXPECT_EQ(calls, 1);
  ASSERT_TRUE(sums[0].fid.has_value());
  EXPECT_DOUBLE_EQ(*sums[0].fid, 1.5);
  EXPECT_EQ(hooked.best_fid(), 1.5);
  EXPECT_EQ(model::weights_digest(plain.gan()), model::weights_digest(hooked.gan()));
}

TEST(Trainer, WritesCheckpointsLossLogAndBest) {
  auto cfg = small_config();
  cfg.epochs = 3;
  cfg.checkpoint_every = 1;
  cfg.checkpoint_keep = 2;
  cfg.fid_every = 1;
  const auto dir = fresh_dir("outputs");
  Trainer t(model::Gan::create(cfg.model, 8), cfg);
  t.set_output_dir(dir);
  std::vector<double> fids = {3.0, 1.0, 2.0};
  int e = 0;
  t.set_fid_hook([&](model::Gan&) { return fids[static_cast<std::size_t>(e++)]; });
  const auto sums = t.train(toy_images(25));
  EXPECT_FALSE(fs::exists(dir / "epoch-0001.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "epoch-0002.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "epoch-0003.ckpt"));
  EXPECT_EQ(sums[2].checkpoint, (dir / "epoch-0003.ckpt").string());

  // best.ckpt is the epoch-2 model (lowest FID), not the last one.
  const auto best = model::load_checkpoint((dir / "best.ckpt").string());
  const auto e2 = model::load_checkpoint((dir / "epoch-0002.ckpt").string());
  EXPECT_EQ(best.digest, e2.digest);
  EXPECT_EQ(best.info.extra["epoch"], 2);
  EXPECT_EQ(t.best_fid(), 1.0);
  const auto last = model::load_checkpoint((dir / "epoch-0003.ckpt").string());
  EXPECT_EQ(last.digest, model::weights_digest(t.gan()));
  EXPECT_EQ(last.info.step, t.generator_optimizer().steps());

  std::ifstream csv(dir / "loss.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, csv_header());
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, static_cast<int>(t.log().size()));
  // 25 images, b = 4: 7 batches per epoch, 21 critic updates, 4 generator steps.
  EXPECT_EQ(rows, 4);
}

TEST(Trainer, RejectsMismatchedInputs) {
  auto cfg = small_config();
  Trainer t(model::Gan::create(cfg.model, 1), cfg);
  EXPECT_THROW(t.train({}), ArgumentError);
  data::SynthOptions o;
  o.n = 4;
  o.image_size = 64;
  EXPECT_THROW(t.train(data::images_of(data::synth_toy_patches(o))), ConfigError);
  std::vector<Tensor> two(2, Tensor({4, 3, 32, 32}));
  EXPECT_THROW(t.train_step(two), ArgumentError);

  auto bad = cfg;
  bad.model = model::ModelConfig::toy(64);
  EXPECT_THROW(Trainer(model::Gan::create(cfg.model, 1), bad), ConfigError);
}

TEST(Trainer, DivergenceRaisesNumericalError) {
  auto cfg = small_config();
  cfg.epochs = 50;
  cfg.learning_rate = 1e30;
  Trainer t(model::Gan::create(cfg.model, 1), cfg);
  EXPECT_THROW(t.train(toy_images(20)), NumericalError);
}

TEST(TrainConfigJson, RoundTripsAndRejectsUnknownKeys) {
  TrainConfig c;
  c.learning_rate = 3e-4;
  c.loss_kind = LossKind::Hinge;
  c.subsample = 500;
  c.model = model::ModelConfig::toy(32);
  const nlohmann::json j = c;
  const auto back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);

  EXPECT_THROW(nlohmann::json({{"learnin_rate", 1}}).get<TrainConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json({{"model", "toy128"}}).get<TrainConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json({{"batch_size", "big"}}).get<TrainConfig>(), ConfigError);
  const auto preset = nlohmann::json({{"model", "reference224"}}).get<TrainConfig>();
  EXPECT_EQ(preset.model.image_size, 224);

  TrainConfig d;
  EXPECT_EQ(d.critic_steps_per_gen, 5);
  EXPECT_EQ(d.adam_beta1, 0.5);
  EXPECT_EQ(d.learning_rate, 1e-4);
  d.adam_beta2 = 1.0;
  EXPECT_THROW(d.validate(), ConfigError);
}

} // namespace
} // namespace pathgan::train
