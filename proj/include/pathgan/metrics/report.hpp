#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathgan/features/extractors.hpp"
#include "pathgan/metrics/frechet.hpp"
#include "pathgan/metrics/kid.hpp"
#include "pathgan/metrics/one_nn.hpp"

namespace pathgan::metrics {

struct CurvePoint {
  double fraction;
  double value;
};

struct MetricReport {
  std::string metric;
  double value = 0.0;
  std::optional<double> std_error;
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  features::FeatureSpaceId space;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<CurvePoint> curve;
  std::vector<std::string> flags;
};

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j = {{"metric", r.metric},
                      {"value", r.value},
                      {"n1", r.n1},
                      {"n2", r.n2},
                      {"space", r.space},
                      {"seed", r.seed},
                      {"config_digest", r.config_digest},
                      {"flags", r.flags}};
  j["std_error"] = r.std_error ? nlohmann::json(*r.std_error) : nlohmann::json(nullptr);
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : r.curve) curve.push_back({{"fraction", p.fraction}, {"value", p.value}});
  j["curve"] = curve;
  return j;
}

inline std::string provenance_digest(const nlohmann::json& cfg) { return digest_hex(cfg.dump()); }

inline void require_same_space(const features::FeatureMatrix& a, const features::FeatureMatrix& b) {
  if (a.space.name != b.space.name || a.space.dimension != b.space.dimension ||
      a.space.config_digest != b.space.config_digest)
    throw ArgumentError("feature matrices come from different feature spaces");
}

/// Seeded subsample without replacement to at most n rows (order kept).
inline features::FeatureMatrix subsample_rows(const features::FeatureMatrix& f, std::int64_t n, std::uint64_t seed) {
  if (n <= 0 || n >= f.rows) return f;
  std::vector<std::size_t> idx(static_cast<std::size_t>(f.rows));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(n));
  std::sort(idx.begin(), idx.end());
  return f.select(idx);
}

inline MetricReport fid_report(const features::FeatureMatrix& real, const features::FeatureMatrix& gen,
                               std::int64_t n = 10000, std::uint64_t seed = 0) {
  require_same_space(real, gen);
  const auto r = subsample_rows(real, n, seed), g = subsample_rows(gen, n, seed + 1);
  if (r.rows < 2 || g.rows < 2) throw ArgumentError("fid: each side needs at least 2 images");
  MetricReport rep;
  rep.metric = "fid";
  rep.value = frechet_distance(features::fit_gaussian(r), features::fit_gaussian(g));
  rep.n1 = r.rows;
  rep.n2 = g.rows;
  rep.space = real.space;
  rep.seed = seed;
  rep.config_digest = provenance_digest({{"metric", "fid"}, {"n", n}, {"seed", seed}});
  return rep;
}

/// Images -> features -> FID in one call.
inline MetricReport fid_images(const std::vector<Image>& real, const std::vector<Image>& gen,
                               const features::FeatureExtractor& space, std::int64_t n = 10000, std::uint64_t seed = 0) {
  return fid_report(space.extract(real), space.extract(gen), n, seed);
}

inline MetricReport kid_report(const features::FeatureMatrix& a, const features::FeatureMatrix& b, int block_size = 100,
                               std::uint64_t seed = 0) {
  require_same_space(a, b);
  const auto k = kid(a.matrix(), b.matrix(), block_size, seed);
  MetricReport rep;
  rep.metric = "kid";
  rep.value = k.value;
  if (k.blocks > 1) rep.std_error = k.std_error;
  rep.n1 = a.rows;
  rep.n2 = b.rows;
  rep.space = a.space;
  rep.seed = seed;
  rep.config_digest = provenance_digest({{"metric", "kid"}, {"block_size", block_size}, {"seed", seed}});
  return rep;
}

inline MetricReport one_nn_report(const features::FeatureMatrix& a, const features::FeatureMatrix& b,
                                  std::uint64_t seed = 0) {
  require_same_space(a, b);
  const auto r = one_nn_accuracy(a.matrix(), b.matrix(), seed);
  MetricReport rep;
  rep.metric = "onenn";
  rep.value = r.accuracy;
  rep.n1 = rep.n2 = r.n;
  rep.space = a.space;
  rep.seed = seed;
  rep.config_digest = provenance_digest({{"metric", "onenn"}, {"seed", seed}, {"tie_break", "smallest-index"}});
  return rep;
}

} // namespace pathgan::metrics
