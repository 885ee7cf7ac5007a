#pragma once

// Procedural "cell blob" textures standing in for H&E tissue at desk scale.
// Each archetype is a background stain colour with a low-frequency texture,
// plus a Poisson number of soft-edged nuclei blobs.

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pathgan/core/image.hpp"
#include "pathgan/data/tissue.hpp"

namespace pathgan::data {

struct Archetype {
  TissueLabel label;
  std::array<float, 3> background;
  std::array<float, 3> blob;
  /// Expected blobs per 64×64 area.
  double density;
  float radius_min;
  float radius_max;
};

inline std::vector<Archetype> default_archetypes() {
  return {
      {TissueLabel::Tumor, {0.86f, 0.62f, 0.74f}, {0.36f, 0.18f, 0.48f}, 28.0, 3.0f, 5.0f},
      {TissueLabel::Stroma, {0.93f, 0.60f, 0.70f}, {0.50f, 0.28f, 0.56f}, 6.0, 1.5f, 2.5f},
      {TissueLabel::Lymphocytes, {0.84f, 0.70f, 0.82f}, {0.20f, 0.12f, 0.36f}, 60.0, 1.2f, 2.0f},
      {TissueLabel::NormalMucosa, {0.78f, 0.52f, 0.70f}, {0.44f, 0.30f, 0.62f}, 16.0, 2.0f, 3.5f},
  };
}

/// Palette of a different stain (brown chromogen on a pale blue counterstain),
/// used to blend archetypes toward an off-distribution "marker".
inline constexpr std::array<float, 3> kMarkerBackground{0.72f, 0.80f, 0.90f};
inline constexpr std::array<float, 3> kMarkerBlob{0.55f, 0.33f, 0.16f};

struct SynthOptions {
  std::int64_t n = 0;
  int image_size = 64;
  /// Relative weights over archetypes; empty means uniform.
  std::vector<double> class_mix;
  std::uint64_t seed = 0;
  /// 0 = H&E palette, 1 = marker palette.
  float palette_shift = 0.0f;
  std::vector<Archetype> archetypes = default_archetypes();
  std::string id_prefix = "synth";
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream per (seed, index) so subsets render identically.
inline Rng item_rng(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(splitmix64(seed) ^ (index * 0x632be59bd9b4e019ULL)));
}

inline TissuePatch render_archetype(const Archetype& a, int size, float palette_shift, Rng& rng) {
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::normal_distribution<float> noise(0.0f, 0.02f);
  const double mean = a.density * size * size / (64.0 * 64.0);
  const int count = mean > 0 ? std::poisson_distribution<int>(mean)(rng) : 0;

  std::array<float, 3> bg{}, fg{};
  for (int c = 0; c < 3; ++c) {
    bg[c] = (1 - palette_shift) * a.background[c] + palette_shift * kMarkerBackground[c];
    fg[c] = (1 - palette_shift) * a.blob[c] + palette_shift * kMarkerBlob[c];
  }
  const float fx = 1.0f + 2.0f * unit(rng), fy = 1.0f + 2.0f * unit(rng);
  const float px = 2.0f * std::numbers::pi_v<float> * unit(rng), py = 2.0f * std::numbers::pi_v<float> * unit(rng);
  const float tone = 0.04f * (unit(rng) - 0.5f);

  TissuePatch p;
  p.image = Image(size, size);
  p.tissue = a.label;
  p.blob_count = count;
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const float wave = 0.03f * std::sin(fx * 2.0f * std::numbers::pi_v<float> * c / size + px) *
                         std::cos(fy * 2.0f * std::numbers::pi_v<float> * r / size + py);
      for (int ch = 0; ch < 3; ++ch) p.image.at(r, c, ch) = bg[ch] + tone + wave + noise(rng);
    }
  for (int b = 0; b < count; ++b) {
    const float cx = unit(rng) * size, cy = unit(rng) * size;
    const float rad = a.radius_min + (a.radius_max - a.radius_min) * unit(rng);
    const float shade = 1.0f - 0.25f * unit(rng);
    const int y0 = std::max(0, static_cast<int>(cy - rad - 1)), y1 = std::min(size - 1, static_cast<int>(cy + rad + 1));
    const int x0 = std::max(0, static_cast<int>(cx - rad - 1)), x1 = std::min(size - 1, static_cast<int>(cx + rad + 1));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const float d = std::hypot(x + 0.5f - cx, y + 0.5f - cy);
        const float alpha = std::clamp(rad - d + 0.5f, 0.0f, 1.0f);
        if (alpha <= 0.0f) continue;
        for (int ch = 0; ch < 3; ++ch) {
          float& v = p.image.at(y, x, ch);
          v = (1 - alpha) * v + alpha * fg[ch] * shade;
        }
      }
  }
  for (float& v : p.image.pixels) v = std::clamp(v, 0.0f, 1.0f);
  return p;
}

/// Deterministic in (options); patch i depends only on (seed, i).
inline std::vector<TissuePatch> synth_toy_patches(const SynthOptions& opt) {
  if (opt.n < 0) throw ArgumentError("synth: n must be >= 0");
  if (opt.image_size < 4) throw ArgumentError("synth: image_size must be >= 4");
  if (opt.archetypes.empty()) throw ArgumentError("synth: no archetypes");
  std::vector<double> mix = opt.class_mix;
  if (mix.empty()) mix.assign(opt.archetypes.size(), 1.0);
  if (mix.size() != opt.archetypes.size()) throw ArgumentError("synth: class_mix size does not match archetypes");
  std::vector<TissuePatch> out;
  out.reserve(static_cast<std::size_t>(opt.n));
  for (std::int64_t i = 0; i < opt.n; ++i) {
    Rng rng = item_rng(opt.seed, static_cast<std::uint64_t>(i));
    std::discrete_distribution<std::size_t> pick(mix.begin(), mix.end());
    const auto& a = opt.archetypes[pick(rng)];
    TissuePatch p = render_archetype(a, opt.image_size, opt.palette_shift, rng);
    p.id = opt.id_prefix + "-" + std::to_string(i);
    p.source_id = p.id;
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<Image> images_of(const std::vector<TissuePatch>& patches) {
  std::vector<Image> out;
  out.reserve(patches.size());
  for (const auto& p : patches) out.push_back(p.image);
  return out;
}

} // namespace pathgan::data
