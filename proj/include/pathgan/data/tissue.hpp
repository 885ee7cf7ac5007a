#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pathgan/core/image.hpp"

namespace pathgan::data {

enum class TissueLabel {
  Adipose,
  Background,
  Debris,
  Lymphocytes,
  Mucus,
  SmoothMuscle,
  NormalMucosa,
  Stroma,
  Tumor,
};

inline constexpr std::array<std::string_view, 9> kTissueLabelNames = {
    "adipose", "background", "debris", "lymphocytes", "mucus", "smooth-muscle", "normal-mucosa", "stroma", "tumor"};

inline std::string to_string(TissueLabel l) { return std::string(kTissueLabelNames[static_cast<int>(l)]); }

inline TissueLabel tissue_label_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kTissueLabelNames.size(); ++i)
    if (kTissueLabelNames[i] == s) return static_cast<TissueLabel>(i);
  throw ArgumentError("unknown tissue label '" + std::string(s) + "'");
}

struct TissuePatch {
  Image image;
  std::string id;
  std::string source_id;
  std::optional<TissueLabel> tissue;
  std::optional<int> count_class;
  /// Ground-truth blob count, known only for synthetic patches.
  std::optional<int> blob_count;
};

/// Regular-grid tiling, row-major from the top-left corner. Only fully
/// in-bounds placements are emitted; a too-small image yields no patches.
inline std::vector<TissuePatch> extract_patches(const Image& image, int patch_size, double overlap,
                                                const std::string& source_id = "src") {
  if (patch_size < 1) throw ArgumentError("patch_size must be >= 1");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ArgumentError("overlap must be in [0, 1)");
  const int stride = std::max(1, static_cast<int>(std::floor(patch_size * (1.0 - overlap))));
  std::vector<TissuePatch> out;
  if (image.height < patch_size || image.width < patch_size) return out;
  for (int y = 0; y + patch_size <= image.height; y += stride)
    for (int x = 0; x + patch_size <= image.width; x += stride) {
      TissuePatch p;
      p.image = Image(patch_size, patch_size);
      for (int r = 0; r < patch_size; ++r)
        std::copy_n(&image.pixels[(static_cast<std::size_t>(y + r) * image.width + x) * 3],
                    static_cast<std::size_t>(patch_size) * 3, &p.image.pixels[static_cast<std::size_t>(r) * patch_size * 3]);
      p.source_id = source_id;
      p.id = source_id + "/y" + std::to_string(y) + "_x" + std::to_string(x);
      out.push_back(std::move(p));
    }
  return out;
}

inline constexpr float kBackgroundWhiteness = 0.85f;
inline constexpr double kDefaultCoverage = 0.7;

/// Fraction of pixels that are tissue; a pixel is background when every
/// channel exceeds `whiteness`.
inline double tissue_coverage(const Image& image, float whiteness = kBackgroundWhiteness) {
  const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
  std::size_t tissue = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const float* px = &image.pixels[p * 3];
    if (!(px[0] > whiteness && px[1] > whiteness && px[2] > whiteness)) ++tissue;
  }
  return n ? static_cast<double>(tissue) / n : 0.0;
}

inline std::vector<TissuePatch> filter_coverage(std::vector<TissuePatch> patches, double threshold = kDefaultCoverage,
                                                float whiteness = kBackgroundWhiteness) {
  std::erase_if(patches, [&](const TissuePatch& p) { return tissue_coverage(p.image, whiteness) < threshold; });
  return patches;
}

// Rotations are counter-clockwise as displayed: a pixel at the top-left
// corner (x=0, y=0) moves to the bottom-left corner (x=0, y=S-1).
inline Image rotate90(const Image& in) {
  Image out(in.width, in.height);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = in.at(c, in.width - 1 - r, ch);
  return out;
}

inline Image rotate180(const Image& in) {
  Image out(in.height, in.width);
  for (int r = 0; r < in.height; ++r)
    for (int c = 0; c < in.width; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = in.at(in.height - 1 - r, in.width - 1 - c, ch);
  return out;
}

/// Mirror left-right.
inline Image flip_horizontal(const Image& in) {
  Image out(in.height, in.width);
  for (int r = 0; r < in.height; ++r)
    for (int c = 0; c < in.width; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = in.at(r, in.width - 1 - c, ch);
  return out;
}

/// Mirror top-bottom.
inline Image flip_vertical(const Image& in) {
  Image out(in.height, in.width);
  for (int r = 0; r < in.height; ++r)
    std::copy_n(&in.pixels[static_cast<std::size_t>(in.height - 1 - r) * in.width * 3],
                static_cast<std::size_t>(in.width) * 3, &out.pixels[static_cast<std::size_t>(r) * in.width * 3]);
  return out;
}

inline constexpr std::array<std::string_view, 5> kAugmentNames = {"id", "rot90", "rot180", "hflip", "vflip"};

/// [identity, rot90, rot180, hflip, vflip]; labels are copied unchanged.
inline std::vector<TissuePatch> augment(const TissuePatch& p) {
  std::vector<TissuePatch> out(5, p);
  out[1].image = rotate90(p.image);
  out[2].image = rotate180(p.image);
  out[3].image = flip_horizontal(p.image);
  out[4].image = flip_vertical(p.image);
  for (std::size_t i = 1; i < 5; ++i) out[i].id = p.id + "#" + std::string(kAugmentNames[i]);
  return out;
}

inline std::vector<TissuePatch> augment_all(const std::vector<TissuePatch>& patches) {
  std::vector<TissuePatch> out;
  out.reserve(patches.size() * 5);
  for (const auto& p : patches)
    for (auto& a : augment(p)) out.push_back(std::move(a));
  return out;
}

struct CountBins {
  /// Strictly increasing cut points; class = number of edges <= count.
  std::vector<int> edges;
  std::vector<int> classes;
  int effective_classes() const { return static_cast<int>(edges.size()) + 1; }
};

inline int count_class(const std::vector<int>& edges, int count) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), count) - edges.begin());
}

/// Equal-frequency edges: edge k is the (k*n/K)-th smallest count. Edges at
/// or below the minimum and duplicates are dropped, so a distribution with
/// fewer distinct values than classes collapses to fewer classes.
inline CountBins bin_cell_counts(const std::vector<int>& counts, int n_classes) {
  if (n_classes < 2) throw ArgumentError("n_classes must be >= 2");
  for (int c : counts)
    if (c < 0) throw ArgumentError("cell counts must be non-negative");
  CountBins b;
  if (counts.empty()) return b;
  std::vector<int> sorted = counts;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  for (int k = 1; k < n_classes; ++k) {
    const int e = sorted[static_cast<std::size_t>(k) * n / static_cast<std::size_t>(n_classes)];
    if (e > sorted.front() && (b.edges.empty() || e > b.edges.back())) b.edges.push_back(e);
  }
  b.classes.reserve(n);
  for (int c : counts) b.classes.push_back(count_class(b.edges, c));
  return b;
}

} // namespace pathgan::data
