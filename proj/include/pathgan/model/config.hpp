#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathgan/core/error.hpp"

namespace pathgan::model {

/// Network topology. Generator: dense(latent→dense_width) → dense(→seed
/// grid) → residual/upsample stages → 3-channel conv → sigmoid. Critic:
/// residual/downsample stages → dense(→critic_dense_width) → dense(→1).
struct ModelConfig {
  int image_size = 64;
  int seed_grid = 4;
  int latent_dim = 200;
  int mapper_blocks = 4;
  int gen_dense_width = 256;
  /// Seed-grid channels followed by the output channels of every upsample.
  std::vector<int> gen_channels{64, 64, 32, 16, 8};
  /// Input channels (3) followed by the output channels of every downsample.
  std::vector<int> critic_channels{3, 16, 32, 64, 128};
  int critic_dense_width = 256;
  int attention_resolution = 16;
  float leaky_slope = 0.2f;
  bool spectral_norm_generator = true;
  bool spectral_norm_critic = true;
  bool spectral_norm_mapper = false;
  float style_gain = 0.2f;

  /// The 224×224 reference topology (7×7 seed grid).
  static ModelConfig reference224() {
    ModelConfig c;
    c.image_size = 224;
    c.seed_grid = 7;
    c.gen_dense_width = 1024;
    c.gen_channels = {256, 512, 256, 128, 64, 32};
    c.critic_channels = {3, 32, 64, 128, 256, 512};
    c.critic_dense_width = 1024;
    c.attention_resolution = 28;
    return c;
  }

  /// Desk-scale topology for power-of-two image sizes with a 4×4 seed grid.
  static ModelConfig toy(int image_size = 64) {
    ModelConfig c;
    int ups = 0;
    for (int s = 4; s < image_size; s *= 2) ++ups;
    if ((4 << ups) != image_size || ups < 2) throw ConfigError("toy config needs a power-of-two size >= 16");
    c.image_size = image_size;
    c.seed_grid = 4;
    c.gen_channels.clear();
    c.critic_channels = {3};
    for (int i = 0; i <= ups; ++i) c.gen_channels.push_back(std::max(8, 64 >> std::max(0, i - 1)));
    for (int i = 1; i <= ups; ++i) c.critic_channels.push_back(std::min(128, 8 << i));
    c.attention_resolution = 16;
    return c;
  }

  int upsample_stages() const { return static_cast<int>(gen_channels.size()) - 1; }
  int downsample_stages() const { return static_cast<int>(critic_channels.size()) - 1; }
  /// Number of style-receiving generator layers (crossover range is [1, L]).
  int style_layers() const { return 2 + 2 * upsample_stages(); }
  int critic_final_grid() const { return image_size >> downsample_stages(); }

  void validate() const {
    if (latent_dim < 1 || gen_dense_width < 1 || critic_dense_width < 1 || mapper_blocks < 0)
      throw ConfigError("model dimensions must be positive");
    if (gen_channels.size() < 2) throw ConfigError("generator needs at least one upsample stage");
    if (critic_channels.size() < 2 || critic_channels.front() != 3)
      throw ConfigError("critic channels must start with 3 and have at least one downsample stage");
    if ((seed_grid << upsample_stages()) != image_size)
      throw ConfigError("seed grid " + std::to_string(seed_grid) + " × 2^" + std::to_string(upsample_stages()) +
                        " does not reach image size " + std::to_string(image_size));
    if ((critic_final_grid() << downsample_stages()) != image_size || critic_final_grid() < 1)
      throw ConfigError("image size not divisible by 2^" + std::to_string(downsample_stages()));
    bool in_gen = false, in_critic = false;
    for (int i = 0; i < upsample_stages(); ++i) in_gen = in_gen || (seed_grid << i) == attention_resolution;
    for (int i = 0; i < downsample_stages(); ++i) in_critic = in_critic || (image_size >> i) == attention_resolution;
    if (!in_gen || !in_critic)
      throw ConfigError("attention resolution " + std::to_string(attention_resolution) +
                        " is not a residual stage of both networks");
    for (int c : gen_channels)
      if (c < 1) throw ConfigError("channel counts must be positive");
    for (int c : critic_channels)
      if (c < 1) throw ConfigError("channel counts must be positive");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"image_size", c.image_size},
       {"seed_grid", c.seed_grid},
       {"latent_dim", c.latent_dim},
       {"mapper_blocks", c.mapper_blocks},
       {"gen_dense_width", c.gen_dense_width},
       {"gen_channels", c.gen_channels},
       {"critic_channels", c.critic_channels},
       {"critic_dense_width", c.critic_dense_width},
       {"attention_resolution", c.attention_resolution},
       {"leaky_slope", c.leaky_slope},
       {"spectral_norm_generator", c.spectral_norm_generator},
       {"spectral_norm_critic", c.spectral_norm_critic},
       {"spectral_norm_mapper", c.spectral_norm_mapper},
       {"style_gain", c.style_gain}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.seed_grid = j.value("seed_grid", d.seed_grid);
  c.latent_dim = j.value("latent_dim", d.latent_dim);
  c.mapper_blocks = j.value("mapper_blocks", d.mapper_blocks);
  c.gen_dense_width = j.value("gen_dense_width", d.gen_dense_width);
  c.gen_channels = j.value("gen_channels", d.gen_channels);
  c.critic_channels = j.value("critic_channels", d.critic_channels);
  c.critic_dense_width = j.value("critic_dense_width", d.critic_dense_width);
  c.attention_resolution = j.value("attention_resolution", d.attention_resolution);
  c.leaky_slope = j.value("leaky_slope", d.leaky_slope);
  c.spectral_norm_generator = j.value("spectral_norm_generator", d.spectral_norm_generator);
  c.spectral_norm_critic = j.value("spectral_norm_critic", d.spectral_norm_critic);
  c.spectral_norm_mapper = j.value("spectral_norm_mapper", d.spectral_norm_mapper);
  c.style_gain = j.value("style_gain", d.style_gain);
}

} // namespace pathgan::model
