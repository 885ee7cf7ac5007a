#pragma once

// Atlas on disk: <stem>.feat (generated-image features), <stem>.w.feat
// (W rows, feature space "latent-w") and <stem>.json (sidecar).

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include "pathgan/core/png.hpp"
#include "pathgan/features/extractors.hpp"
#include "pathgan/latent/analysis.hpp"
#include "pathgan/model/checkpoint.hpp"

namespace pathgan::latent {

struct AtlasPoint {
  std::string id;
  std::string label;
  double x = 0.0, y = 0.0;
  /// "sample" for built points, "vecop" for registered expression results.
  std::string origin = "sample";
  std::string expression;
};

class LatentAtlas {
public:
  LatentAtlas() = default;

  /// Samples m latents, synthesizes and featurizes them, labels by k-NN
  /// against the real corpus, and projects W to 2-D.
  static LatentAtlas build(model::Gan& gan, const std::string& checkpoint_digest, std::int64_t m, std::uint64_t seed,
                           const features::FeatureExtractor& space, const features::FeatureMatrix& real_features,
                           const std::vector<std::string>& real_labels, std::size_t k = 10,
                           std::unique_ptr<Projector> projector = nullptr) {
    if (m < 3) throw ArgumentError("atlas: need at least 3 points");
    LatentAtlas a;
    a.checkpoint_digest_ = checkpoint_digest;
    a.projector_ = projector ? std::move(projector) : std::make_unique<PcaProjector>();
    const Tensor w = model::map_latent(gan, model::sample_z(m, gan.config.latent_dim, seed));
    a.w_ = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.data(), m,
                                                                                                   gan.config.latent_dim);
    std::vector<Image> images;
    constexpr std::int64_t chunk = 64;
    for (std::int64_t s = 0; s < m; s += chunk) {
      const auto e = std::min(m, s + chunk);
      Tensor part({e - s, gan.config.latent_dim});
      std::copy(w.data() + s * gan.config.latent_dim, w.data() + e * gan.config.latent_dim, part.data());
      for (auto& im : from_batch(model::synthesize(gan, part))) images.push_back(std::move(im));
    }
    std::vector<std::string> ids;
    for (std::int64_t i = 0; i < m; ++i) ids.push_back("g" + std::to_string(i));
    a.features_ = space.extract(images, ids);
    a.features_.tags.assign(static_cast<std::size_t>(m), "generated");
    const auto labels = knn_label(a.features_, real_features, real_labels, std::min<std::size_t>(k, real_labels.size()));
    const Eigen::MatrixXd coords = a.projector_->fit_transform(a.w_.cast<double>());
    for (std::int64_t i = 0; i < m; ++i)
      a.points_.push_back({ids[static_cast<std::size_t>(i)], labels[static_cast<std::size_t>(i)], coords(i, 0), coords(i, 1)});
    a.reindex();
    return a;
  }

  const std::vector<AtlasPoint>& points() const { return points_; }
  const features::FeatureMatrix& features() const { return features_; }
  const std::string& checkpoint_digest() const { return checkpoint_digest_; }
  std::string projector_id() const { return projector_->id(); }
  int latent_dim() const { return static_cast<int>(w_.cols()); }

  const AtlasPoint& point(const std::string& id) const { return points_[index_of(id)]; }

  Eigen::VectorXf w(const std::string& id) const { return w_.row(static_cast<Eigen::Index>(index_of(id))).transpose(); }

  Eigen::VectorXf evaluate(const VectorExpression& e) const {
    return evaluate_expression(e, [&](const std::string& id) { return w(id); });
  }

  /// Adds a derived latent (e.g. a vector-op result). Registering the same
  /// vector again returns the existing point unchanged.
  const AtlasPoint& register_point(const Eigen::VectorXf& wv, const features::FeatureMatrix& feature_row,
                                   const features::FeatureMatrix& real_features,
                                   const std::vector<std::string>& real_labels, const std::string& expression,
                                   std::size_t k = 10) {
    if (wv.size() != w_.cols()) throw ArgumentError("atlas: latent dimension mismatch");
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (w_.row(static_cast<Eigen::Index>(i)).transpose() == wv) return points_[i];
    const Eigen::MatrixXd c = projector_->transform(wv.cast<double>().transpose());
    const auto label = knn_label(feature_row, real_features, real_labels, std::min<std::size_t>(k, real_labels.size()));
    AtlasPoint p{"v" + std::to_string(next_vecop_++), label.at(0), c(0, 0), c(0, 1), "vecop", expression};
    w_.conservativeResize(w_.rows() + 1, Eigen::NoChange);
    w_.row(w_.rows() - 1) = wv.transpose();
    features_.values.insert(features_.values.end(), feature_row.values.begin(), feature_row.values.end());
    features_.rows += 1;
    features_.ids.push_back(p.id);
    features_.tags.push_back("generated");
    points_.push_back(p);
    reindex();
    return points_.back();
  }

  void save(const std::filesystem::path& stem) const {
    features::save_features(stem.string() + ".feat", features_);
    features::FeatureMatrix wm = features::FeatureMatrix::from_matrix(w_.cast<double>(), {"latent-w", 0, checkpoint_digest_});
    wm.ids = features_.ids;
    features::save_features(stem.string() + ".w.feat", wm);
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points_) {
      nlohmann::json j = {{"id", p.id}, {"label", p.label}, {"x", p.x}, {"y", p.y}, {"origin", p.origin}};
      if (!p.expression.empty()) j["expression"] = p.expression;
      pts.push_back(j);
    }
    nlohmann::json side = {{"version", 1},
                           {"checkpoint_digest", checkpoint_digest_},
                           {"projector", projector_->state()},
                           {"feature_file", stem.filename().string() + ".feat"},
                           {"w_file", stem.filename().string() + ".w.feat"},
                           {"next_vecop", next_vecop_},
                           {"points", pts}};
    std::ofstream out(stem.string() + ".json");
    if (!out) throw IntegrityError("cannot write atlas sidecar");
    out << side.dump(2) << '\n';
  }

  static LatentAtlas load(const std::filesystem::path& stem) {
    std::ifstream in(stem.string() + ".json");
    if (!in) throw NotFoundError("cannot open atlas " + stem.string() + ".json");
    nlohmann::json side;
    try {
      side = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError(std::string("atlas sidecar: ") + e.what());
    }
    LatentAtlas a;
    a.checkpoint_digest_ = side.at("checkpoint_digest").get<std::string>();
    const auto dir = stem.parent_path();
    a.features_ = features::load_features((dir / side.at("feature_file").get<std::string>()).string());
    const auto wm = features::load_features((dir / side.at("w_file").get<std::string>()).string(), "latent-w");
    if (wm.space.config_digest != a.checkpoint_digest_) throw IntegrityError("atlas W file belongs to another checkpoint");
    a.w_ = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(wm.values.data(), wm.rows,
                                                                                                   wm.cols());
    const auto& pj = side.at("projector");
    if (pj.at("id") != "pca2") throw CapabilityError("atlas projector '" + pj.at("id").get<std::string>() + "' cannot be restored");
    a.projector_ = std::make_unique<PcaProjector>(PcaProjector::from_state(pj));
    for (const auto& p : side.at("points"))
      a.points_.push_back({p.at("id"), p.at("label"), p.at("x"), p.at("y"), p.value("origin", "sample"), p.value("expression", "")});
    a.next_vecop_ = side.value("next_vecop", 0);
    if (a.points_.size() != static_cast<std::size_t>(a.w_.rows()) || a.features_.rows != a.w_.rows())
      throw IntegrityError("atlas files disagree on point count");
    a.reindex();
    return a;
  }

  LatentAtlas(LatentAtlas&&) = default;
  LatentAtlas& operator=(LatentAtlas&&) = default;

private:
  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFoundError("unknown atlas id '" + id + "'");
    return it->second;
  }
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < points_.size(); ++i) index_[points_[i].id] = i;
  }

  std::string checkpoint_digest_;
  std::unique_ptr<Projector> projector_;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w_;
  features::FeatureMatrix features_;
  std::vector<AtlasPoint> points_;
  std::map<std::string, std::size_t> index_;
  int next_vecop_ = 0;
};

} // namespace pathgan::latent
