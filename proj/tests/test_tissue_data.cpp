#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <map>
#include <set>

#include "pathgan/core/png.hpp"
#include "pathgan/data/dataset.hpp"

namespace pathgan::data {
namespace {

namespace fs = std::filesystem;

Image random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image im(h, w);
  for (auto& v : im.pixels) v = u(rng);
  return im;
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("pathgan-data-" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(ExtractPatches, ReferenceSlideGivesNineByFive) {
  // 1128 wide, 720 tall.
  const auto patches = extract_patches(Image(720, 1128, 0.5f), 224, 0.5);
  ASSERT_EQ(patches.size(), 45u);
  // Row-major from the top-left; stride 112.
  EXPECT_EQ(patches[0].id, "src/y0_x0");
  EXPECT_EQ(patches[1].id, "src/y0_x112");
  EXPECT_EQ(patches[8].id, "src/y0_x896");
  EXPECT_EQ(patches[9].id, "src/y112_x0");
  EXPECT_EQ(patches[44].id, "src/y448_x896");
}

TEST(ExtractPatches, EdgeCases) {
  EXPECT_EQ(extract_patches(Image(224, 224), 224, 0.0).size(), 1u);
  EXPECT_EQ(extract_patches(Image(224, 224), 224, 0.9).size(), 1u);
  EXPECT_TRUE(extract_patches(Image(224, 223), 224, 0.5).empty());
  EXPECT_TRUE(extract_patches(Image(223, 224), 224, 0.5).empty());
  EXPECT_THROW(extract_patches(Image(8, 8), 0, 0.5), ArgumentError);
  EXPECT_THROW(extract_patches(Image(8, 8), 4, 1.0), ArgumentError);
  EXPECT_THROW(extract_patches(Image(8, 8), 4, -0.1), ArgumentError);
}

TEST(ExtractPatches, CountFormulaAndContentHold) {
  const int s = 16;
  for (int h = s; h < 3 * s; h += 3)
    for (int w = s; w < 3 * s; w += 5) {
      const auto im = random_image(h, w, static_cast<std::uint64_t>(h * 100 + w));
      const auto patches = extract_patches(im, s, 0.5);
      const std::size_t expect = static_cast<std::size_t>(((h - s) / (s / 2) + 1) * ((w - s) / (s / 2) + 1));
      ASSERT_EQ(patches.size(), expect) << h << "x" << w;
      const int cols = (w - s) / (s / 2) + 1;
      for (std::size_t i = 0; i < patches.size(); ++i) {
        const int y = static_cast<int>(i) / cols * (s / 2), x = static_cast<int>(i) % cols * (s / 2);
        EXPECT_EQ(patches[i].image.at(0, 0, 0), im.at(y, x, 0));
        EXPECT_EQ(patches[i].image.at(s - 1, s - 1, 2), im.at(y + s - 1, x + s - 1, 2));
      }
    }
}

TEST(Coverage, ClosedForms) {
  EXPECT_DOUBLE_EQ(tissue_coverage(Image(8, 8, 1.0f)), 0.0);
  EXPECT_DOUBLE_EQ(tissue_coverage(Image(8, 8, 0.5f)), 1.0);
  Image half(8, 8, 0.5f);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 4; ++c)
      for (int ch = 0; ch < 3; ++ch) half.at(r, c, ch) = 1.0f;
  EXPECT_DOUBLE_EQ(tissue_coverage(half), 0.5);
  // One channel at the threshold keeps the pixel as tissue.
  Image edge(1, 1, 0.9f);
  edge.at(0, 0, 1) = kBackgroundWhiteness;
  EXPECT_DOUBLE_EQ(tissue_coverage(edge), 1.0);
}

TEST(Coverage, FilterIsIdempotent) {
  std::vector<TissuePatch> patches;
  for (int i = 0; i < 40; ++i) {
    TissuePatch p;
    p.image = random_image(16, 16, static_cast<std::uint64_t>(i));
    // Whiten a varying share of rows so coverage spans the threshold.
    for (int r = 0; r < i % 16; ++r)
      for (int c = 0; c < 16; ++c)
        for (int ch = 0; ch < 3; ++ch) p.image.at(r, c, ch) = 0.95f;
    p.id = std::to_string(i);
    patches.push_back(std::move(p));
  }
  const auto once = filter_coverage(patches);
  EXPECT_GT(once.size(), 0u);
  EXPECT_LT(once.size(), patches.size());
  const auto twice = filter_coverage(once);
  ASSERT_EQ(twice.size(), once.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_EQ(twice[i].id, once[i].id);
    EXPECT_EQ(twice[i].image, once[i].image);
  }
  for (const auto& p : once) EXPECT_GE(tissue_coverage(p.image), kDefaultCoverage);
}

TEST(Augment, GroupIdentitiesAreExact) {
  for (int s : {1, 2, 5, 16}) {
    const auto im = random_image(s, s, static_cast<std::uint64_t>(s));
    EXPECT_EQ(rotate90(rotate90(im)), rotate180(im));
    EXPECT_EQ(rotate180(rotate180(im)), im);
    EXPECT_EQ(rotate90(rotate90(rotate90(rotate90(im)))), im);
    EXPECT_EQ(flip_horizontal(flip_horizontal(im)), im);
    EXPECT_EQ(flip_vertical(flip_vertical(im)), im);
    EXPECT_EQ(flip_horizontal(flip_vertical(im)), rotate180(im));
  }
}

TEST(Augment, RotationIsCounterClockwise) {
  const int s = 6;
  Image im(s, s, 0.0f);
  im.at(0, 0, 0) = 1.0f;
  const auto r = rotate90(im);
  EXPECT_EQ(r.at(s - 1, 0, 0), 1.0f);
  float total = 0.0f;
  for (float v : r.pixels) total += v;
  EXPECT_EQ(total, 1.0f);
  // The top-right corner moves to the top-left.
  Image tr(s, s, 0.0f);
  tr.at(0, s - 1, 1) = 1.0f;
  EXPECT_EQ(rotate90(tr).at(0, 0, 1), 1.0f);
}

TEST(Augment, ProducesFiveLabelledVariants) {
  TissuePatch p;
  p.image = random_image(8, 8, 3);
  p.id = "a";
  p.source_id = "slide";
  p.tissue = TissueLabel::Stroma;
  p.count_class = 4;
  const auto out = augment(p);
  ASSERT_EQ(out.size(), 5u);
  EXPECT_EQ(out[0].image, p.image);
  EXPECT_EQ(out[1].image, rotate90(p.image));
  EXPECT_EQ(out[2].image, rotate180(p.image));
  EXPECT_EQ(out[3].image, flip_horizontal(p.image));
  EXPECT_EQ(out[4].image, flip_vertical(p.image));
  std::set<std::string> ids;
  for (const auto& a : out) {
    EXPECT_EQ(a.tissue, TissueLabel::Stroma);
    EXPECT_EQ(a.count_class, 4);
    EXPECT_EQ(a.source_id, "slide");
    ids.insert(a.id);
  }
  EXPECT_EQ(ids.size(), 5u);
}

TEST(Bins, UniformCountsSplitIntoDecades) {
  std::vector<int> counts(80);
  std::iota(counts.begin(), counts.end(), 0);
  const auto b = bin_cell_counts(counts, 8);
  EXPECT_EQ(b.edges, (std::vector<int>{10, 20, 30, 40, 50, 60, 70}));
  EXPECT_EQ(b.effective_classes(), 8);
  for (int c = 0; c < 80; ++c) EXPECT_EQ(b.classes[static_cast<std::size_t>(c)], c / 10);
}

TEST(Bins, DegenerateAndClampedCases) {
  const auto same = bin_cell_counts(std::vector<int>(30, 7), 8);
  EXPECT_TRUE(same.edges.empty());
  EXPECT_EQ(same.effective_classes(), 1);
  for (int c : same.classes) EXPECT_EQ(c, 0);

  const auto few = bin_cell_counts({1, 1, 1, 2, 2, 2, 3, 3, 3}, 8);
  EXPECT_EQ(few.effective_classes(), 3);
  EXPECT_EQ(few.edges, (std::vector<int>{2, 3}));

  std::vector<int> counts(80);
  std::iota(counts.begin(), counts.end(), 5);
  const auto b = bin_cell_counts(counts, 8);
  EXPECT_EQ(count_class(b.edges, 0), 0);
  EXPECT_EQ(count_class(b.edges, 100000), 7);

  EXPECT_THROW(bin_cell_counts({1, 2}, 1), ArgumentError);
  EXPECT_THROW(bin_cell_counts({1, -2}, 8), ArgumentError);
  EXPECT_TRUE(bin_cell_counts({}, 8).classes.empty());
}

TEST(Bins, DistinctValuesGiveBalancedPartition) {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = std::uniform_int_distribution<int>(8, 400)(rng);
    std::vector<int> counts(static_cast<std::size_t>(n));
    std::iota(counts.begin(), counts.end(), 0);
    for (auto& c : counts) c *= 3;
    std::shuffle(counts.begin(), counts.end(), rng);
    const auto b = bin_cell_counts(counts, 8);
    ASSERT_EQ(b.effective_classes(), 8);
    EXPECT_TRUE(std::is_sorted(b.edges.begin(), b.edges.end()));
    EXPECT_EQ(std::adjacent_find(b.edges.begin(), b.edges.end()), b.edges.end());
    std::map<int, int> pop;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      ASSERT_GE(b.classes[i], 0);
      ASSERT_LT(b.classes[i], 8);
      ++pop[b.classes[i]];
    }
    int lo = n, hi = 0;
    for (const auto& [_, v] : pop) lo = std::min(lo, v), hi = std::max(hi, v);
    EXPECT_LE(hi - lo, 1) << "n=" << n;
    // Lower classes hold lower counts.
    for (std::size_t i = 0; i < counts.size(); ++i)
      for (std::size_t j = 0; j < counts.size(); ++j)
        if (counts[i] < counts[j]) ASSERT_LE(b.classes[i], b.classes[j]);
  }
}

TEST(Synth, SeedDeterministicAndLabelled) {
  SynthOptions o;
  o.n = 12;
  o.image_size = 32;
  o.seed = 9;
  const auto a = synth_toy_dataset(o, 0.25), b = synth_toy_dataset(o, 0.25);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.patches[i].image.pixels, b.patches[i].image.pixels);
    EXPECT_TRUE(a.patches[i].tissue.has_value());
    EXPECT_TRUE(a.patches[i].blob_count.has_value());
    for (float v : a.patches[i].image.pixels) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
  }
  EXPECT_EQ(a.split, b.split);
  EXPECT_EQ(a.config_digest(), b.config_digest());
  o.seed = 10;
  EXPECT_NE(synth_toy_dataset(o).patches[0].image.pixels, a.patches[0].image.pixels);

  // Item i depends only on (seed, i).
  o.seed = 9;
  o.n = 5;
  const auto prefix = synth_toy_patches(o);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(prefix[i].image, a.patches[i].image);

  o.n = 0;
  EXPECT_TRUE(synth_toy_dataset(o).patches.empty());
}

TEST(Synth, ZeroDensityHasNoBlobs) {
  SynthOptions o;
  o.n = 20;
  o.image_size = 32;
  o.archetypes = {{TissueLabel::Adipose, {0.9f, 0.8f, 0.8f}, {0.2f, 0.1f, 0.3f}, 0.0, 2.0f, 3.0f}};
  for (const auto& p : synth_toy_patches(o)) {
    EXPECT_EQ(p.blob_count, 0);
    EXPECT_EQ(p.tissue, TissueLabel::Adipose);
  }
}

TEST(Synth, BlobCountsTrackDensity) {
  SynthOptions o;
  o.n = 400;
  o.image_size = 64;
  std::map<TissueLabel, std::pair<double, int>> sums;
  for (const auto& p : synth_toy_patches(o)) {
    auto& s = sums[*p.tissue];
    s.first += *p.blob_count;
    ++s.second;
  }
  for (const auto& a : default_archetypes()) {
    const auto& s = sums.at(a.label);
    const double mean = s.first / s.second;
    // Poisson mean; 5 standard errors.
    EXPECT_NEAR(mean, a.density, 5.0 * std::sqrt(a.density / s.second)) << to_string(a.label);
  }
}

TEST(Split, SourcesStayTogetherAndSplitsAreDisjoint) {
  std::vector<TissuePatch> patches;
  for (int s = 0; s < 20; ++s)
    for (int k = 0; k < 5; ++k) {
      TissuePatch p;
      p.source_id = "s" + std::to_string(s);
      p.id = p.source_id + "/" + std::to_string(k);
      patches.push_back(p);
    }
  const auto split = split_by_source(patches, 0.25, 3);
  EXPECT_EQ(split, split_by_source(patches, 0.25, 3));
  std::map<std::string, std::set<std::string>> per_source;
  int test = 0;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    per_source[patches[i].source_id].insert(split[i]);
    test += split[i] == "test";
  }
  for (const auto& [_, tags] : per_source) EXPECT_EQ(tags.size(), 1u);
  EXPECT_EQ(test, 25);
  EXPECT_THROW(split_by_source(patches, 1.0, 3), ArgumentError);
}

TEST(Dataset, IngestFiltersBeforeAugmenting) {
  // Left half is tissue, right half white; 8×16 source with 8-pixel patches.
  Image src(8, 16, 0.95f);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c)
      for (int ch = 0; ch < 3; ++ch) src.at(r, c, ch) = 0.4f;
  IngestOptions opt;
  opt.patch_size = 8;
  opt.overlap = 0.5;
  opt.test_fraction = 0.0;
  const auto ds = build_dataset({{src, "slide", "", TissueLabel::Tumor}}, opt);
  // Three placements at x = 0, 4, 8 with coverage 1, 0.5, 0: one survives, five variants.
  ASSERT_EQ(ds.size(), 5u);
  for (const auto& p : ds.patches) {
    EXPECT_EQ(p.tissue, TissueLabel::Tumor);
    EXPECT_GE(tissue_coverage(p.image), opt.coverage_threshold);
  }
  opt.augment = false;
  EXPECT_EQ(build_dataset({{src, "slide", "", std::nullopt}}, opt).size(), 1u);
}

TEST(Dataset, ManifestRoundTrip) {
  SynthOptions o;
  o.n = 10;
  o.image_size = 16;
  o.seed = 4;
  auto ds = synth_toy_dataset(o, 0.3);
  assign_count_classes(ds, 8);
  const auto dir = fresh_dir("manifest");
  save_dataset(dir, ds);
  const auto m = read_json_file(dir / "manifest.json");
  for (const char* k : {"version", "seed", "patch_size", "overlap", "coverage_threshold", "splits", "labels", "bin_edges"})
    EXPECT_TRUE(m.contains(k)) << k;
  EXPECT_EQ(m["splits"]["train"].size() + m["splits"]["test"].size(), 10u);

  const auto back = load_dataset(dir);
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.split, ds.split);
  EXPECT_EQ(back.bin_edges, ds.bin_edges);
  EXPECT_EQ(back.config_digest(), ds.config_digest());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.patches[i].id, ds.patches[i].id);
    EXPECT_EQ(back.patches[i].tissue, ds.patches[i].tissue);
    EXPECT_EQ(back.patches[i].count_class, ds.patches[i].count_class);
    EXPECT_EQ(back.patches[i].image, ds.patches[i].image.quantized());
  }

  auto tampered = m;
  tampered["seed"] = 5;
  std::ofstream(dir / "manifest.json") << tampered.dump();
  EXPECT_THROW(load_dataset(dir), IntegrityError);
  EXPECT_THROW(load_dataset(dir / "missing"), NotFoundError);
}

TEST(Dataset, CountEdgesComeFromTrainSplit) {
  PatchDataset ds;
  for (int i = 0; i < 16; ++i) {
    TissuePatch p;
    p.id = std::to_string(i);
    p.blob_count = i < 8 ? i : 100 + i;
    ds.patches.push_back(p);
    ds.split.push_back(i < 8 ? "train" : "test");
  }
  assign_count_classes(ds, 8);
  EXPECT_EQ(ds.bin_edges, (std::vector<int>{1, 2, 3, 4, 5, 6, 7}));
  for (int i = 8; i < 16; ++i) EXPECT_EQ(ds.patches[static_cast<std::size_t>(i)].count_class, 7);
}

TEST(Png, RoundTripIsLosslessAtEightBits) {
  const auto im = random_image(7, 5, 1).quantized();
  EXPECT_EQ(decode_png(encode_png(im)), im);
  EXPECT_THROW(decode_png("not a png"), IntegrityError);
}

TEST(Labels, NamesRoundTrip) {
  for (std::size_t i = 0; i < kTissueLabelNames.size(); ++i) {
    const auto l = static_cast<TissueLabel>(i);
    EXPECT_EQ(tissue_label_from_string(to_string(l)), l);
  }
  EXPECT_THROW(tissue_label_from_string("bone"), ArgumentError);
}

} // namespace
} // namespace pathgan::data
