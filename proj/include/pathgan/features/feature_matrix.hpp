#pragma once

// Feature file: u64 header length, JSON header, then n*d float32 values
// (row-major, little-endian). The header carries the payload digest.

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pathgan/core/digest.hpp"
#include "pathgan/core/error.hpp"

namespace pathgan::features {

struct FeatureSpaceId {
  std::string name;
  int dimension = 0;
  /// Pins the exact extractor (weights, projection seed, ...).
  std::string config_digest;

  bool operator==(const FeatureSpaceId&) const = default;
};

inline void to_json(nlohmann::json& j, const FeatureSpaceId& s) {
  j = {{"name", s.name}, {"dimension", s.dimension}, {"config_digest", s.config_digest}};
}
inline void from_json(const nlohmann::json& j, FeatureSpaceId& s) {
  s.name = j.at("name").get<std::string>();
  s.dimension = j.at("dimension").get<int>();
  s.config_digest = j.value("config_digest", "");
}

struct FeatureMatrix {
  FeatureSpaceId space;
  std::int64_t rows = 0;
  std::vector<float> values;
  /// Per-row image ids and provenance tags ("real"/"generated"); may be empty.
  std::vector<std::string> ids;
  std::vector<std::string> tags;

  int cols() const { return space.dimension; }
  const float* row(std::int64_t i) const { return values.data() + i * cols(); }

  Eigen::MatrixXd matrix() const {
    return Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), rows,
                                                                                                   cols())
        .cast<double>();
  }

  static FeatureMatrix from_matrix(const Eigen::MatrixXd& m, FeatureSpaceId space) {
    FeatureMatrix f;
    space.dimension = static_cast<int>(m.cols());
    f.space = std::move(space);
    f.rows = m.rows();
    f.values.resize(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(f.values.data(), m.rows(),
                                                                                      m.cols()) = m.cast<float>();
    return f;
  }

  void validate() const {
    if (space.dimension < 1) throw ArgumentError("feature space dimension must be >= 1");
    if (values.size() != static_cast<std::size_t>(rows) * cols()) throw ArgumentError("feature matrix size mismatch");
    if (!ids.empty() && ids.size() != static_cast<std::size_t>(rows)) throw ArgumentError("feature ids length mismatch");
    if (!tags.empty() && tags.size() != static_cast<std::size_t>(rows)) throw ArgumentError("feature tags length mismatch");
    for (float v : values)
      if (!std::isfinite(v)) throw NumericalError("feature matrix has non-finite entries");
  }

  /// Rows selected by index, tags and ids carried along.
  FeatureMatrix select(const std::vector<std::size_t>& index) const {
    FeatureMatrix out;
    out.space = space;
    out.rows = static_cast<std::int64_t>(index.size());
    out.values.reserve(index.size() * cols());
    for (auto i : index) {
      if (i >= static_cast<std::size_t>(rows)) throw ArgumentError("feature row index out of range");
      out.values.insert(out.values.end(), row(static_cast<std::int64_t>(i)), row(static_cast<std::int64_t>(i)) + cols());
      if (!ids.empty()) out.ids.push_back(ids[i]);
      if (!tags.empty()) out.tags.push_back(tags[i]);
    }
    return out;
  }

  std::string payload_digest() const { return digest_hex(values.data(), values.size() * sizeof(float)); }

  bool operator==(const FeatureMatrix&) const = default;
};

inline std::string encode_features(const FeatureMatrix& f) {
  static_assert(std::endian::native == std::endian::little);
  f.validate();
  nlohmann::json h = {{"format", "pathgan-features"},
                      {"version", 1},
                      {"space", f.space},
                      {"n", f.rows},
                      {"d", f.cols()},
                      {"dtype", "float32"},
                      {"order", "row-major"},
                      {"endian", "little"},
                      {"digest", f.payload_digest()},
                      {"ids", f.ids},
                      {"tags", f.tags}};
  const std::string hs = h.dump();
  std::string out(8, '\0');
  const std::uint64_t len = hs.size();
  std::memcpy(out.data(), &len, 8);
  out += hs;
  out.append(reinterpret_cast<const char*>(f.values.data()), f.values.size() * sizeof(float));
  return out;
}

/// `expected` (when given) must match the stored space name.
inline FeatureMatrix decode_features(const std::string& bytes, const std::string& expected_space = "") {
  if (bytes.size() < 8) throw IntegrityError("feature file truncated");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data(), 8);
  if (len > bytes.size() - 8) throw IntegrityError("feature file truncated (header)");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(8, len));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("feature header: ") + e.what());
  }
  if (h.value("format", "") != "pathgan-features" || h.value("dtype", "") != "float32")
    throw IntegrityError("not a float32 feature file");
  FeatureMatrix f;
  f.space = h.at("space").get<FeatureSpaceId>();
  f.rows = h.at("n").get<std::int64_t>();
  if (h.at("d").get<int>() != f.space.dimension) throw IntegrityError("feature header dimension mismatch");
  if (!expected_space.empty() && f.space.name != expected_space)
    throw IntegrityError("feature space '" + f.space.name + "' does not match requested '" + expected_space + "'");
  const std::size_t count = static_cast<std::size_t>(f.rows) * f.cols();
  if (bytes.size() - 8 - len != count * sizeof(float)) throw IntegrityError("feature payload size mismatch");
  f.values.resize(count);
  std::memcpy(f.values.data(), bytes.data() + 8 + len, count * sizeof(float));
  f.ids = h.value("ids", std::vector<std::string>{});
  f.tags = h.value("tags", std::vector<std::string>{});
  if (f.payload_digest() != h.at("digest").get<std::string>()) throw IntegrityError("feature payload digest mismatch");
  return f;
}

inline void save_features(const std::string& path, const FeatureMatrix& f) {
  const auto bytes = encode_features(f);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IntegrityError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline FeatureMatrix load_features(const std::string& path, const std::string& expected_space = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_features(ss.str(), expected_space);
}

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::int64_t n = 0;
};

/// Column means and unbiased covariance, symmetrised exactly.
inline GaussianFit fit_gaussian(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw ArgumentError("fit_gaussian needs at least 2 rows");
  GaussianFit g;
  g.n = x.rows();
  g.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - g.mean.transpose();
  g.cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
  g.cov = 0.5 * (g.cov + g.cov.transpose()).eval();
  return g;
}

inline GaussianFit fit_gaussian(const FeatureMatrix& f) { return fit_gaussian(f.matrix()); }

} // namespace pathgan::features
