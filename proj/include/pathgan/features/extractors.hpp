#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>

#include "pathgan/core/image.hpp"
#include "pathgan/features/feature_matrix.hpp"

namespace pathgan::features {

class FeatureExtractor {
public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureSpaceId space() const = 0;
  /// One row per image, in input order.
  virtual FeatureMatrix extract(std::span<const Image> images, std::span<const std::string> ids = {}) const = 0;
};

inline void attach_ids(FeatureMatrix& f, std::span<const std::string> ids) {
  if (ids.empty()) return;
  if (static_cast<std::int64_t>(ids.size()) != f.rows) throw ArgumentError("extract: ids/images length mismatch");
  f.ids.assign(ids.begin(), ids.end());
}

/// Area-resize to `input_size`, 8× average pool, then a fixed seeded
/// Gaussian projection to `dimension`. Linear in pixel values.
class TestProjection final : public FeatureExtractor {
public:
  static constexpr int kPool = 8;

  explicit TestProjection(int input_size = 64, int dimension = 64, std::uint64_t seed = 20190101)
      : input_size_(input_size), dimension_(dimension), seed_(seed) {
    if (input_size < kPool || input_size % kPool) throw ConfigError("test-projection: input size must be a multiple of 8");
    if (dimension < 1) throw ConfigError("test-projection: dimension must be >= 1");
    const int side = input_size / kPool;
    in_dim_ = side * side * 3;
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in_dim_)));
    proj_.resize(dimension, in_dim_);
    for (int j = 0; j < in_dim_; ++j)
      for (int i = 0; i < dimension; ++i) proj_(i, j) = normal(rng);
    // Every pooled input must reach the output, or pixel edits could go unseen.
    for (int j = 0; j < in_dim_; ++j)
      if (proj_.col(j).cwiseAbs().maxCoeff() == 0.0) throw ConfigError("test-projection: degenerate projection column");
  }

  FeatureSpaceId space() const override {
    nlohmann::json cfg = {{"extractor", "test-projection"}, {"input_size", input_size_}, {"pool", kPool},
                          {"dimension", dimension_}, {"seed", seed_}};
    return {"test-projection", dimension_, digest_hex(cfg.dump())};
  }

  /// Pooled pixel vector (channel-major per cell) for one image.
  Eigen::VectorXd pooled(const Image& image) const {
    const Image im = resize_area(image, input_size_, input_size_);
    const int side = input_size_ / kPool;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(in_dim_);
    for (int r = 0; r < input_size_; ++r)
      for (int c = 0; c < input_size_; ++c)
        for (int ch = 0; ch < 3; ++ch) v[(ch * side + r / kPool) * side + c / kPool] += im.at(r, c, ch);
    return v / double(kPool * kPool);
  }

  FeatureMatrix extract(std::span<const Image> images, std::span<const std::string> ids = {}) const override {
    Eigen::MatrixXd pooled_rows(static_cast<Eigen::Index>(images.size()), in_dim_);
    for (std::size_t i = 0; i < images.size(); ++i) pooled_rows.row(static_cast<Eigen::Index>(i)) = pooled(images[i]);
    auto f = FeatureMatrix::from_matrix(pooled_rows * proj_.transpose(), space());
    attach_ids(f, ids);
    return f;
  }

  const Eigen::MatrixXd& projection() const { return proj_; }

private:
  int input_size_, dimension_;
  std::uint64_t seed_;
  int in_dim_ = 0;
  Eigen::MatrixXd proj_;
};

/// Batch callback of an external pretrained convolutional network.
using ConvnetBackend = std::function<Eigen::MatrixXd(std::span<const Image>)>;

struct ConvnetBackendInfo {
  std::string name;
  int dimension = 2048;
  int input_size = 299;
  /// Digest of the backend weights, recorded in the feature space id.
  std::string weights_digest;
};

/// Adapter for "pool_3"-style features. Nothing is bundled: without a
/// registered backend every call raises CapabilityError.
class ConvnetPool3 final : public FeatureExtractor {
public:
  ConvnetPool3() = default;
  ConvnetPool3(ConvnetBackendInfo info, ConvnetBackend backend) : info_(std::move(info)), backend_(std::move(backend)) {}

  bool available() const { return static_cast<bool>(backend_); }

  FeatureSpaceId space() const override {
    if (!available()) throw CapabilityError("convnet-pool3: no pretrained backend configured");
    nlohmann::json cfg = {{"extractor", "convnet-pool3"}, {"backend", info_.name}, {"input_size", info_.input_size},
                          {"weights", info_.weights_digest}};
    return {"convnet-pool3", info_.dimension, digest_hex(cfg.dump())};
  }

  FeatureMatrix extract(std::span<const Image> images, std::span<const std::string> ids = {}) const override {
    if (!available()) throw CapabilityError("convnet-pool3: no pretrained backend configured");
    std::vector<Image> resized;
    resized.reserve(images.size());
    for (const auto& im : images) resized.push_back(resize_area(im, info_.input_size, info_.input_size));
    Eigen::MatrixXd m = backend_(resized);
    if (m.rows() != static_cast<Eigen::Index>(images.size()) || m.cols() != info_.dimension)
      throw IntegrityError("convnet-pool3: backend returned wrong shape");
    auto f = FeatureMatrix::from_matrix(m, space());
    attach_ids(f, ids);
    return f;
  }

private:
  ConvnetBackendInfo info_;
  ConvnetBackend backend_;
};

struct CellularIngest {
  FeatureMatrix features;
  /// "line N: reason" for every rejected row.
  std::vector<std::string> rejected;
  /// Ids not present in the supplied manifest id set.
  std::vector<std::string> unknown_ids;
};

inline FeatureSpaceId cellular_space() {
  return {"cellular", 3, digest_hex(std::string("cellular:cancer_cells,other_cells,tumor_area_ratio"))};
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    else if (ch == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') cur += ch;
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end && std::isfinite(out);
}

} // namespace detail

/// Reads {image_id, cancer_cells, other_cells, tumor_area_ratio} rows in file
/// order. Invalid rows are rejected and reported rather than thrown.
inline CellularIngest ingest_cellular_stream(std::istream& in, const std::set<std::string>* known_ids = nullptr) {
  CellularIngest out;
  out.features.space = cellular_space();
  std::string line;
  if (!std::getline(in, line)) return out;
  const auto header = detail::split_csv_line(line);
  const std::vector<std::string> want = {"image_id", "cancer_cells", "other_cells", "tumor_area_ratio"};
  std::vector<int> col(want.size(), -1);
  for (std::size_t i = 0; i < header.size(); ++i)
    for (std::size_t k = 0; k < want.size(); ++k)
      if (header[i] == want[k]) col[k] = static_cast<int>(i);
  for (std::size_t k = 0; k < want.size(); ++k)
    if (col[k] < 0) throw IntegrityError("cellular CSV: missing column '" + want[k] + "'");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    auto reject = [&](const std::string& why) { out.rejected.push_back("line " + std::to_string(lineno) + ": " + why); };
    if (f.size() < header.size()) {
      reject("missing fields");
      continue;
    }
    const std::string& id = f[col[0]];
    double v[3];
    bool ok = !id.empty();
    for (int k = 0; k < 3 && ok; ++k) ok = detail::parse_double(f[col[k + 1]], v[k]);
    if (!ok) {
      reject("missing or non-numeric field");
      continue;
    }
    if (v[0] < 0 || v[1] < 0) {
      reject("negative cell count");
      continue;
    }
    if (v[2] < 0 || v[2] > 1) {
      reject("tumor_area_ratio outside [0,1]");
      continue;
    }
    if (known_ids && !known_ids->count(id)) out.unknown_ids.push_back(id);
    for (double x : v) out.features.values.push_back(static_cast<float>(x));
    out.features.ids.push_back(id);
    ++out.features.rows;
  }
  return out;
}

inline CellularIngest ingest_cellular(const std::string& csv_path, const std::set<std::string>* known_ids = nullptr) {
  std::ifstream in(csv_path);
  if (!in) throw NotFoundError("cannot open " + csv_path);
  return ingest_cellular_stream(in, known_ids);
}

/// Looks up pre-computed cellular rows by image id.
class CellularTable final : public FeatureExtractor {
public:
  explicit CellularTable(FeatureMatrix table) : table_(std::move(table)) {
    for (std::int64_t i = 0; i < table_.rows; ++i) index_[table_.ids[static_cast<std::size_t>(i)]] = i;
  }
  FeatureSpaceId space() const override { return table_.space; }
  FeatureMatrix extract(std::span<const Image> images, std::span<const std::string> ids = {}) const override {
    if (ids.size() != images.size()) throw ArgumentError("cellular features are looked up by image id");
    std::vector<std::size_t> rows;
    for (const auto& id : ids) {
      auto it = index_.find(id);
      if (it == index_.end()) throw NotFoundError("no cellular features for image '" + id + "'");
      rows.push_back(static_cast<std::size_t>(it->second));
    }
    return table_.select(rows);
  }

private:
  FeatureMatrix table_;
  std::map<std::string, std::int64_t> index_;
};

/// {"extractor": "test-projection", "input_size", "dimension", "seed"} or
/// {"extractor": "cellular", "csv": path} or {"extractor": "convnet-pool3"}.
/// convnet-pool3 has no bundled backend and yields the unavailable adapter.
inline std::shared_ptr<const FeatureExtractor> make_extractor(const nlohmann::json& cfg = nlohmann::json::object()) {
  const std::string kind = cfg.value("extractor", "test-projection");
  if (kind == "test-projection")
    return std::make_shared<TestProjection>(cfg.value("input_size", 64), cfg.value("dimension", 64),
                                            cfg.value("seed", std::uint64_t{20190101}));
  if (kind == "cellular") {
    if (!cfg.contains("csv")) throw ConfigError("cellular extractor needs a 'csv' path");
    auto ing = ingest_cellular(cfg["csv"].get<std::string>());
    return std::make_shared<CellularTable>(std::move(ing.features));
  }
  if (kind == "convnet-pool3") return std::make_shared<ConvnetPool3>();
  throw ConfigError("unknown feature extractor '" + kind + "'");
}

} // namespace pathgan::features
