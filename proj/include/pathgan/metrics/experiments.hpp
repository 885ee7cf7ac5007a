#pragma once

// Contamination and consistency harnesses over two feature pools: a
// reference corpus and a contaminant corpus.

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "pathgan/data/synth.hpp"
#include "pathgan/metrics/report.hpp"

namespace pathgan::metrics {

struct ContaminationSpec {
  std::string reference_id = "reference";
  std::string contaminant_id = "contaminant";
  std::vector<double> fractions{0.0, 0.25, 0.5, 0.75, 1.0};
  std::int64_t set_size = 5000;
  std::uint64_t seed = 0;
  std::vector<std::string> metrics{"fid", "kid", "onenn"};
  int kid_block = 100;
  /// Consistency flatness threshold on max/min of the curve.
  double flat_ratio = 3.0;

  void validate() const {
    if (fractions.empty()) throw ArgumentError("contamination: no fractions");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
      if (fractions[i] < 0.0 || fractions[i] > 1.0) throw ArgumentError("contamination: fractions must lie in [0,1]");
      if (i && fractions[i] <= fractions[i - 1]) throw ArgumentError("contamination: fractions must be strictly increasing");
    }
    if (set_size < 2) throw ArgumentError("contamination: set_size must be >= 2");
    for (const auto& m : metrics)
      if (m != "fid" && m != "kid" && m != "onenn") throw ArgumentError("contamination: unknown metric '" + m + "'");
  }
};

inline nlohmann::json to_json(const ContaminationSpec& s) {
  return {{"reference_id", s.reference_id}, {"contaminant_id", s.contaminant_id}, {"fractions", s.fractions},
          {"set_size", s.set_size},         {"seed", s.seed},                     {"metrics", s.metrics},
          {"kid_block", s.kid_block},       {"flat_ratio", s.flat_ratio}};
}

inline ContaminationSpec contamination_spec_from_json(const nlohmann::json& j) {
  ContaminationSpec s;
  s.reference_id = j.value("reference_id", s.reference_id);
  s.contaminant_id = j.value("contaminant_id", s.contaminant_id);
  s.fractions = j.value("fractions", s.fractions);
  s.set_size = j.value("set_size", s.set_size);
  s.seed = j.value("seed", s.seed);
  s.metrics = j.value("metrics", s.metrics);
  s.kid_block = j.value("kid_block", s.kid_block);
  s.flat_ratio = j.value("flat_ratio", s.flat_ratio);
  s.validate();
  return s;
}

using MetricFn = std::function<MetricReport(const features::FeatureMatrix&, const features::FeatureMatrix&)>;

inline MetricFn metric_by_name(const std::string& name, const ContaminationSpec& spec) {
  if (name == "fid") return [](const auto& a, const auto& b) { return fid_report(a, b, 0, 0); };
  if (name == "kid")
    return [block = spec.kid_block, seed = spec.seed](const auto& a, const auto& b) { return kid_report(a, b, block, seed); };
  if (name == "onenn") return [seed = spec.seed](const auto& a, const auto& b) { return one_nn_report(a, b, seed); };
  throw ArgumentError("unknown metric '" + name + "'");
}

namespace detail {

/// Draws disjoint index sets from a pool, without replacement.
class Drawer {
public:
  Drawer(std::int64_t pool, std::uint64_t seed) : order_(static_cast<std::size_t>(pool)) {
    std::iota(order_.begin(), order_.end(), 0);
    Rng rng(seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }
  std::vector<std::size_t> take(std::int64_t k, const char* what) {
    if (next_ + static_cast<std::size_t>(k) > order_.size())
      throw ArgumentError(std::string("insufficient ") + what + " corpus for disjoint sets");
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(next_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(next_ + k));
    next_ += static_cast<std::size_t>(k);
    return out;
  }

private:
  std::vector<std::size_t> order_;
  std::size_t next_ = 0;
};

inline features::FeatureMatrix concat_rows(const features::FeatureMatrix& a, const features::FeatureMatrix& b) {
  features::FeatureMatrix out = a;
  out.values.insert(out.values.end(), b.values.begin(), b.values.end());
  out.rows += b.rows;
  out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
  out.tags.insert(out.tags.end(), b.tags.begin(), b.tags.end());
  if (out.ids.size() != static_cast<std::size_t>(out.rows)) out.ids.clear();
  if (out.tags.size() != static_cast<std::size_t>(out.rows)) out.tags.clear();
  return out;
}

inline features::FeatureMatrix mixed_set(const features::FeatureMatrix& ref, const features::FeatureMatrix& con,
                                         Drawer& ref_draw, Drawer& con_draw, std::int64_t size, double fraction) {
  const auto k = static_cast<std::int64_t>(std::floor(fraction * static_cast<double>(size)));
  return concat_rows(ref.select(ref_draw.take(size - k, "reference")), con.select(con_draw.take(k, "contaminant")));
}

inline MetricReport curve_report(const std::string& metric, const std::string& kind, const ContaminationSpec& spec,
                                 const features::FeatureMatrix& ref) {
  MetricReport r;
  r.metric = metric + "-" + kind;
  r.n1 = r.n2 = spec.set_size;
  r.space = ref.space;
  r.seed = spec.seed;
  r.config_digest = provenance_digest({{"experiment", kind}, {"spec", to_json(spec)}});
  return r;
}

} // namespace detail

/// For each fraction f: a pure reference set against a set holding
/// floor(f·size) contaminant rows, all rows drawn disjointly.
inline std::vector<MetricReport> contamination_experiment(const ContaminationSpec& spec,
                                                          const features::FeatureMatrix& reference,
                                                          const features::FeatureMatrix& contaminant) {
  spec.validate();
  require_same_space(reference, contaminant);
  std::vector<MetricReport> out;
  for (const auto& m : spec.metrics) out.push_back(detail::curve_report(m, "contamination", spec, reference));
  for (std::size_t fi = 0; fi < spec.fractions.size(); ++fi) {
    detail::Drawer rd(reference.rows, spec.seed + 1000 * fi), cd(contaminant.rows, spec.seed + 1000 * fi + 1);
    const auto base = reference.select(rd.take(spec.set_size, "reference"));
    const auto mixed = detail::mixed_set(reference, contaminant, rd, cd, spec.set_size, spec.fractions[fi]);
    for (std::size_t mi = 0; mi < spec.metrics.size(); ++mi)
      out[mi].curve.push_back({spec.fractions[fi], metric_by_name(spec.metrics[mi], spec)(base, mixed).value});
  }
  for (auto& r : out) {
    r.value = r.curve.back().value;
    for (std::size_t i = 1; i < r.curve.size(); ++i)
      if (!(r.curve[i].value > r.curve[i - 1].value)) {
        r.flags.push_back("not-strictly-increasing");
        break;
      }
  }
  return out;
}

/// For each fraction f: two independent, equally contaminated sets. A
/// consistent metric stays near its same-distribution baseline throughout.
/// `independent = false` reuses one draw for both sets (a guard for the
/// disjointness requirement: the distance must then be zero).
inline std::vector<MetricReport> consistency_experiment(const ContaminationSpec& spec,
                                                        const features::FeatureMatrix& reference,
                                                        const features::FeatureMatrix& contaminant,
                                                        bool independent = true) {
  spec.validate();
  require_same_space(reference, contaminant);
  std::vector<MetricReport> out;
  for (const auto& m : spec.metrics) out.push_back(detail::curve_report(m, "consistency", spec, reference));
  for (std::size_t fi = 0; fi < spec.fractions.size(); ++fi) {
    detail::Drawer rd(reference.rows, spec.seed + 1000 * fi), cd(contaminant.rows, spec.seed + 1000 * fi + 1);
    const auto a = detail::mixed_set(reference, contaminant, rd, cd, spec.set_size, spec.fractions[fi]);
    features::FeatureMatrix b = a;
    if (independent) b = detail::mixed_set(reference, contaminant, rd, cd, spec.set_size, spec.fractions[fi]);
    for (std::size_t mi = 0; mi < spec.metrics.size(); ++mi)
      out[mi].curve.push_back({spec.fractions[fi], metric_by_name(spec.metrics[mi], spec)(a, b).value});
  }
  for (auto& r : out) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : r.curve) {
      lo = std::min(lo, p.value);
      hi = std::max(hi, p.value);
    }
    r.value = hi;
    // KID and the 1-NN excess can sit at or below zero; flatness is judged
    // on the ratio only where it is meaningful.
    if (r.metric.rfind("fid", 0) == 0 && !(lo > 0 && hi / lo < spec.flat_ratio)) r.flags.push_back("not-flat");
  }
  return out;
}

/// Spearman rank correlation between fraction and value (average ranks on ties).
inline double spearman(const std::vector<CurvePoint>& curve) {
  auto ranks = [](std::vector<double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (i + j) / 2.0 + 1.0;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> x, y;
  for (const auto& p : curve) {
    x.push_back(p.fraction);
    y.push_back(p.value);
  }
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n, my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxx > 0 && syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

struct SyntheticCorpusSpec {
  std::int64_t n = 2000;
  int image_size = 64;
  float palette_shift = 0.0f;
  std::uint64_t seed = 0;
};

/// Renders synthetic archetype images and projects them; stands in for a
/// real reference or contaminant corpus at desk scale.
inline features::FeatureMatrix synthetic_corpus_features(const SyntheticCorpusSpec& c,
                                                         const features::FeatureExtractor& space) {
  data::SynthOptions opt;
  opt.n = c.n;
  opt.image_size = c.image_size;
  opt.seed = c.seed;
  opt.palette_shift = c.palette_shift;
  opt.id_prefix = "synth-p" + std::to_string(static_cast<int>(std::lround(c.palette_shift * 100)));
  const auto patches = data::synth_toy_patches(opt);
  std::vector<std::string> ids;
  for (const auto& p : patches) ids.push_back(p.id);
  return space.extract(data::images_of(patches), ids);
}

} // namespace pathgan::metrics
