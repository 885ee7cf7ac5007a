// Builds a latent atlas for an untrained toy generator (or a checkpoint),
// renders an interpolation strip and evaluates a vector expression.

#include <cstdio>

#include <CLI11.hpp>

#include "demo_util.hpp"
#include "pathgan/pathgan.hpp"

using namespace pathgan;

int main(int argc, char** argv) {
  CLI::App app{"Latent space demo"};
  std::string ckpt, out = "demo-latent", expression = "g0 - g1 + g2";
  int points = 60;
  app.add_option("--checkpoint", ckpt, "Checkpoint to explore (default: fresh 32x32 toy model)");
  app.add_option("--points", points, "Atlas size");
  app.add_option("--expression", expression, "Vector expression over atlas ids");
  app.add_option("--out", out, "Output directory");
  CLI11_PARSE(app, argc, argv);

  model::Gan gan = ckpt.empty() ? model::Gan::create(model::ModelConfig::toy(32), 1) : model::load_checkpoint(ckpt).gan;
  const std::string digest = model::weights_digest(gan);
  data::SynthOptions so;
  so.n = 200;
  so.image_size = gan.config.image_size;
  so.seed = 4;
  const auto real = data::synth_toy_patches(so);
  std::vector<std::string> labels;
  for (const auto& p : real) labels.push_back(data::to_string(*p.tissue));
  features::TestProjection space;
  const auto real_f = space.extract(data::images_of(real));

  auto atlas = latent::LatentAtlas::build(gan, digest, points, 3, space, real_f, labels, 10);
  std::map<std::string, int> counts;
  for (const auto& p : atlas.points()) counts[p.label]++;
  std::printf("atlas of %zu points, projector %s\n", atlas.points().size(), atlas.projector_id().c_str());
  for (const auto& [l, c] : counts) std::printf("  %-10s %d\n", l.c_str(), c);

  std::vector<Image> strip;
  for (const auto& w : latent::interpolate(atlas.w("g0"), atlas.w("g1"), 8)) {
    Tensor t({1, gan.config.latent_dim});
    std::copy(w.data(), w.data() + w.size(), t.data());
    strip.push_back(from_batch(model::synthesize(gan, t), 0));
  }
  std::filesystem::create_directories(out);
  write_png(out + "/interpolation.png", demo::tile(strip, 8));

  const auto w = atlas.evaluate(latent::parse_expression(expression));
  Tensor t({1, gan.config.latent_dim});
  std::copy(w.data(), w.data() + w.size(), t.data());
  const Image im = from_batch(model::synthesize(gan, t), 0);
  const auto& p = atlas.register_point(w, space.extract(std::span<const Image>(&im, 1)), real_f, labels, expression, 10);
  std::printf("%s -> %s at (%.3f, %.3f), labelled %s\n", expression.c_str(), p.id.c_str(), p.x, p.y, p.label.c_str());
  write_png(out + "/vecop.png", im);
  atlas.save(out + "/atlas");
  std::printf("wrote %s/{interpolation.png,vecop.png,atlas.*}\n", out.c_str());
}
