// Trains the 32×32 toy GAN for a few epochs on synthetic tissue and reports
// test-projection FID before and after. Writes samples and loss.csv to --out.

#include <cstdio>

#include <CLI11.hpp>

#include "demo_util.hpp"
#include "pathgan/pathgan.hpp"

using namespace pathgan;

int main(int argc, char** argv) {
  CLI::App app{"Toy GAN training demo"};
  int n = 600, epochs = 3;
  std::string out = "demo-train";
  app.add_option("--images", n, "Synthetic training images");
  app.add_option("--epochs", epochs, "Training epochs");
  app.add_option("--out", out, "Output directory");
  CLI11_PARSE(app, argc, argv);

  data::SynthOptions so;
  so.n = n;
  so.image_size = 32;
  so.seed = 7;
  const auto images = data::images_of(data::synth_toy_patches(so));
  so.n = 500;
  so.seed = 99;
  features::TestProjection space;
  const auto held = space.extract(data::images_of(data::synth_toy_patches(so)));

  train::TrainConfig cfg;
  cfg.model = model::ModelConfig::toy(32);
  cfg.epochs = epochs;
  cfg.seed = 1;
  cfg.fid_every = 1;
  auto fid = [&](model::Gan& g) { return metrics::fid_report(held, space.extract(from_batch(model::generate_from_seed(g, 500, 5)))).value; };

  auto gan = model::Gan::create(cfg.model, 1);
  std::printf("untrained FID %.4f\n", fid(gan));
  train::Trainer tr(std::move(gan), cfg);
  tr.set_output_dir(out);
  tr.set_fid_hook(fid);
  tr.train(images, [](const train::EpochSummary& s) {
    std::printf("epoch %d  generator steps %lld  FID %.4f  -> %s\n", s.epoch, static_cast<long long>(s.generator_steps), *s.fid,
                s.checkpoint.c_str());
  });
  write_png(out + "/samples.png", demo::tile(from_batch(model::generate_from_seed(tr.gan(), 16, 11)), 8));
  write_png(out + "/real.png", demo::tile(std::vector<Image>(images.begin(), images.begin() + 16), 8));
  std::printf("wrote %s/{samples.png,real.png,loss.csv}\n", out.c_str());
}
