#pragma once

// On-disk dataset: <dir>/manifest.json plus <dir>/images/<n>.png.

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "pathgan/core/digest.hpp"
#include "pathgan/core/png.hpp"
#include "pathgan/data/synth.hpp"
#include "pathgan/data/tissue.hpp"

namespace pathgan::data {

inline constexpr int kManifestVersion = 1;

struct PatchDataset {
  std::vector<TissuePatch> patches;
  /// Parallel to patches: "train" or "test".
  std::vector<std::string> split;
  std::uint64_t seed = 0;
  int patch_size = 0;
  double overlap = 0.0;
  double coverage_threshold = kDefaultCoverage;
  std::vector<int> bin_edges;
  /// Free-form generation parameters; hashed into config_digest().
  nlohmann::json config = nlohmann::json::object();

  std::size_t size() const { return patches.size(); }

  std::string config_digest() const {
    nlohmann::json c = {{"config", config},
                        {"seed", seed},
                        {"patch_size", patch_size},
                        {"overlap", overlap},
                        {"coverage_threshold", coverage_threshold}};
    return digest_hex(c.dump());
  }

  std::vector<const TissuePatch*> subset(const std::string& which) const {
    std::vector<const TissuePatch*> out;
    for (std::size_t i = 0; i < patches.size(); ++i)
      if (split[i] == which) out.push_back(&patches[i]);
    return out;
  }

  std::vector<Image> images(const std::string& which = "") const {
    std::vector<Image> out;
    for (std::size_t i = 0; i < patches.size(); ++i)
      if (which.empty() || split[i] == which) out.push_back(patches[i].image);
    return out;
  }
};

/// Reproducible split: patches sharing a source image always land together.
inline std::vector<std::string> split_by_source(const std::vector<TissuePatch>& patches, double test_fraction,
                                                std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ArgumentError("test_fraction must be in [0, 1)");
  std::vector<std::string> sources;
  std::set<std::string> seen;
  for (const auto& p : patches)
    if (seen.insert(p.source_id).second) sources.push_back(p.source_id);
  Rng rng(seed ^ 0x5eedULL);
  std::shuffle(sources.begin(), sources.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * sources.size()));
  std::set<std::string> test(sources.begin(), sources.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::string> out;
  out.reserve(patches.size());
  for (const auto& p : patches) out.push_back(test.count(p.source_id) ? "test" : "train");
  return out;
}

inline PatchDataset synth_toy_dataset(const SynthOptions& opt, double test_fraction = 0.0) {
  PatchDataset ds;
  ds.patches = synth_toy_patches(opt);
  ds.split = split_by_source(ds.patches, test_fraction, opt.seed);
  ds.seed = opt.seed;
  ds.patch_size = opt.image_size;
  ds.coverage_threshold = 0.0;
  ds.config = {{"generator", "synth"},
               {"n", opt.n},
               {"class_mix", opt.class_mix},
               {"palette_shift", opt.palette_shift},
               {"test_fraction", test_fraction}};
  return ds;
}

struct IngestOptions {
  int patch_size = 224;
  double overlap = 0.5;
  double coverage_threshold = kDefaultCoverage;
  bool augment = true;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct SourceImage {
  Image pixels;
  std::string id;
  std::string cohort;
  std::optional<TissueLabel> label;
};

/// Tile, drop low-coverage patches, then augment the survivors.
inline PatchDataset build_dataset(const std::vector<SourceImage>& sources, const IngestOptions& opt) {
  PatchDataset ds;
  for (const auto& s : sources) {
    auto patches = filter_coverage(extract_patches(s.pixels, opt.patch_size, opt.overlap, s.id), opt.coverage_threshold);
    for (auto& p : patches) p.tissue = s.label;
    if (opt.augment) patches = augment_all(patches);
    for (auto& p : patches) ds.patches.push_back(std::move(p));
  }
  ds.split = split_by_source(ds.patches, opt.test_fraction, opt.seed);
  ds.seed = opt.seed;
  ds.patch_size = opt.patch_size;
  ds.overlap = opt.overlap;
  ds.coverage_threshold = opt.coverage_threshold;
  ds.config = {{"generator", "ingest"}, {"augment", opt.augment}, {"test_fraction", opt.test_fraction}};
  return ds;
}

/// PNG files under `dir`, sorted by path. A first-level subdirectory named
/// after a tissue label tags its images with that label.
inline std::vector<SourceImage> read_source_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw NotFoundError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<SourceImage> out;
  for (const auto& f : files) {
    SourceImage s;
    s.pixels = read_png(f.string());
    const auto rel = fs::relative(f, dir);
    s.id = fs::path(rel).replace_extension().generic_string();
    if (rel.has_parent_path()) {
      s.cohort = rel.begin()->string();
      try {
        s.label = tissue_label_from_string(s.cohort);
      } catch (const ArgumentError&) {
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline nlohmann::json manifest_json(const PatchDataset& ds) {
  nlohmann::json train = nlohmann::json::array(), test = nlohmann::json::array();
  nlohmann::json labels = nlohmann::json::object(), items = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.patches.size(); ++i) {
    const auto& p = ds.patches[i];
    (ds.split[i] == "test" ? test : train).push_back(p.id);
    nlohmann::json item = {{"id", p.id}, {"file", "images/" + std::to_string(i) + ".png"}, {"source_id", p.source_id}};
    if (p.tissue) {
      labels[p.id] = to_string(*p.tissue);
      item["tissue"] = to_string(*p.tissue);
    }
    if (p.count_class) item["count_class"] = *p.count_class;
    if (p.blob_count) item["blob_count"] = *p.blob_count;
    items.push_back(std::move(item));
  }
  return {{"version", kManifestVersion},
          {"seed", ds.seed},
          {"patch_size", ds.patch_size},
          {"overlap", ds.overlap},
          {"coverage_threshold", ds.coverage_threshold},
          {"splits", {{"train", train}, {"test", test}}},
          {"labels", labels},
          {"bin_edges", ds.bin_edges},
          {"config", ds.config},
          {"config_digest", ds.config_digest()},
          {"items", items}};
}

inline void save_dataset(const std::filesystem::path& dir, const PatchDataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  for (std::size_t i = 0; i < ds.patches.size(); ++i)
    write_png((dir / "images" / (std::to_string(i) + ".png")).string(), ds.patches[i].image);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IntegrityError("cannot write manifest in " + dir.string());
  out << manifest_json(ds).dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

inline PatchDataset load_dataset(const std::filesystem::path& dir) {
  const auto m = read_json_file(dir / "manifest.json");
  if (m.value("version", 0) != kManifestVersion) throw IntegrityError("unsupported manifest version");
  PatchDataset ds;
  ds.seed = m.at("seed").get<std::uint64_t>();
  ds.patch_size = m.at("patch_size").get<int>();
  ds.overlap = m.at("overlap").get<double>();
  ds.coverage_threshold = m.at("coverage_threshold").get<double>();
  ds.bin_edges = m.at("bin_edges").get<std::vector<int>>();
  ds.config = m.value("config", nlohmann::json::object());
  std::set<std::string> test;
  for (const auto& id : m.at("splits").at("test")) test.insert(id.get<std::string>());
  for (const auto& item : m.at("items")) {
    TissuePatch p;
    p.id = item.at("id").get<std::string>();
    p.source_id = item.value("source_id", p.id);
    p.image = read_png((dir / item.at("file").get<std::string>()).string());
    if (p.image.height != ds.patch_size || p.image.width != ds.patch_size)
      throw IntegrityError("patch " + p.id + " does not match patch_size");
    if (item.contains("tissue")) p.tissue = tissue_label_from_string(item["tissue"].get<std::string>());
    if (item.contains("count_class")) p.count_class = item["count_class"].get<int>();
    if (item.contains("blob_count")) p.blob_count = item["blob_count"].get<int>();
    ds.split.push_back(test.count(p.id) ? "test" : "train");
    ds.patches.push_back(std::move(p));
  }
  if (m.contains("config_digest") && m["config_digest"] != ds.config_digest())
    throw IntegrityError("manifest config digest mismatch");
  return ds;
}

/// Assigns count classes from blob counts (or an external count map) and
/// stores the edges with the dataset.
inline void assign_count_classes(PatchDataset& ds, int n_classes, const std::map<std::string, int>& counts = {}) {
  std::vector<int> values;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.patches.size(); ++i) {
    auto it = counts.find(ds.patches[i].id);
    if (it != counts.end()) {
      values.push_back(it->second);
      idx.push_back(i);
    } else if (ds.patches[i].blob_count) {
      values.push_back(*ds.patches[i].blob_count);
      idx.push_back(i);
    }
  }
  // Edges come from the training split only; test patches are classified with them.
  std::vector<int> train_values;
  for (std::size_t k = 0; k < idx.size(); ++k)
    if (ds.split[idx[k]] == "train") train_values.push_back(values[k]);
  ds.bin_edges = bin_cell_counts(train_values.empty() ? values : train_values, n_classes).edges;
  for (std::size_t k = 0; k < idx.size(); ++k) ds.patches[idx[k]].count_class = count_class(ds.bin_edges, values[k]);
}

} // namespace pathgan::data
