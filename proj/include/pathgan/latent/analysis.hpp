#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pathgan/features/feature_matrix.hpp"

namespace pathgan::latent {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Neighbor {
  std::size_t index;
  double distance;
};

/// k nearest rows of `corpus` to `query` (Euclidean), ascending; equal
/// distances keep corpus order. k larger than the corpus returns everything.
inline std::vector<Neighbor> nearest(const Eigen::VectorXd& query, const Eigen::MatrixXd& corpus, std::size_t k) {
  if (corpus.rows() == 0) throw ArgumentError("nearest: empty corpus");
  if (corpus.cols() != query.size()) throw ArgumentError("nearest: dimension mismatch");
  std::vector<Neighbor> all(static_cast<std::size_t>(corpus.rows()));
  for (Eigen::Index i = 0; i < corpus.rows(); ++i)
    all[static_cast<std::size_t>(i)] = {static_cast<std::size_t>(i), (corpus.row(i).transpose() - query).norm()};
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), [](const auto& a, const auto& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  });
  all.resize(k);
  return all;
}

/// Majority label among the k nearest real rows; a tie goes to the tied
/// label whose member is nearest.
inline std::vector<std::string> knn_label(const Eigen::MatrixXd& gen, const Eigen::MatrixXd& real,
                                          const std::vector<std::string>& real_labels, std::size_t k = 10) {
  if (real.rows() == 0) throw ArgumentError("knn_label: empty real set");
  if (real_labels.size() != static_cast<std::size_t>(real.rows())) throw ArgumentError("knn_label: labels length mismatch");
  if (k < 1 || k > static_cast<std::size_t>(real.rows())) throw ArgumentError("knn_label: k must be in [1, n_real]");
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(gen.rows()));
  for (Eigen::Index i = 0; i < gen.rows(); ++i) {
    const auto nb = nearest(gen.row(i).transpose(), real, k);
    std::map<std::string, int> votes;
    int best = 0;
    for (const auto& n : nb) best = std::max(best, ++votes[real_labels[n.index]]);
    for (const auto& n : nb)
      if (votes[real_labels[n.index]] == best) {
        out.push_back(real_labels[n.index]);
        break;
      }
  }
  return out;
}

inline std::vector<std::string> knn_label(const features::FeatureMatrix& gen, const features::FeatureMatrix& real,
                                          const std::vector<std::string>& real_labels, std::size_t k = 10) {
  if (gen.space.name != real.space.name || gen.space.dimension != real.space.dimension)
    throw ArgumentError("knn_label: feature spaces differ");
  return knn_label(gen.matrix(), real.matrix(), real_labels, k);
}

/// w(t) = (1−t)·w1 + t·w2 for t = i/(steps−1), i = 0..steps−1.
inline std::vector<Eigen::VectorXf> interpolate(const Eigen::VectorXf& w1, const Eigen::VectorXf& w2, int steps) {
  if (steps < 2) throw ArgumentError("interpolate: steps must be >= 2");
  if (w1.size() != w2.size()) throw ArgumentError("interpolate: dimension mismatch");
  std::vector<Eigen::VectorXf> out;
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / (steps - 1);
    out.push_back(((1.0 - t) * w1.cast<double>() + t * w2.cast<double>()).cast<float>());
  }
  return out;
}

class Projector {
public:
  virtual ~Projector() = default;
  virtual std::string id() const = 0;
  /// Fits on the rows of w and returns m×2 coordinates.
  virtual Eigen::MatrixXd fit_transform(const Eigen::MatrixXd& w) = 0;
  /// Projects new rows with the fitted state; existing points do not move.
  virtual Eigen::MatrixXd transform(const Eigen::MatrixXd& w) const = 0;
  virtual nlohmann::json state() const = 0;
};

/// Top-2 principal components; each axis' sign makes its largest-magnitude
/// loading positive. A rank-1 input yields a zero second axis and a warning.
class PcaProjector final : public Projector {
public:
  std::string id() const override { return "pca2"; }

  Eigen::MatrixXd fit_transform(const Eigen::MatrixXd& w) override {
    if (w.rows() < 3) throw ArgumentError("project_2d: need at least 3 points");
    mean_ = w.colwise().mean().transpose();
    const Eigen::MatrixXd c = w.rowwise() - mean_.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.transpose() * c);
    components_ = Eigen::MatrixXd::Zero(w.cols(), 2);
    warnings_.clear();
    const auto d = w.cols();
    const double top = es.eigenvalues()(d - 1);
    for (int k = 0; k < 2 && k < d; ++k) {
      const double ev = es.eigenvalues()(d - 1 - k);
      if (!(ev > 1e-12 * std::max(1.0, top))) {
        warnings_.push_back("rank-deficient input: axis " + std::to_string(k + 1) + " is zero");
        continue;
      }
      Eigen::VectorXd v = es.eigenvectors().col(d - 1 - k);
      Eigen::Index arg;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      components_.col(k) = v;
    }
    return transform(w);
  }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& w) const override {
    if (w.cols() != mean_.size()) throw ArgumentError("project_2d: projector not fitted for this dimension");
    return (w.rowwise() - mean_.transpose()) * components_;
  }

  nlohmann::json state() const override {
    return {{"id", id()},
            {"mean", std::vector<double>(mean_.data(), mean_.data() + mean_.size())},
            {"components", std::vector<double>(components_.data(), components_.data() + components_.size())}};
  }

  static PcaProjector from_state(const nlohmann::json& j) {
    PcaProjector p;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto comp = j.at("components").get<std::vector<double>>();
    p.mean_ = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    if (comp.size() != mean.size() * 2) throw IntegrityError("pca projector state malformed");
    p.components_ = Eigen::Map<const Eigen::MatrixXd>(comp.data(), static_cast<Eigen::Index>(mean.size()), 2);
    return p;
  }

  const std::vector<std::string>& warnings() const { return warnings_; }

private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd components_;
  std::vector<std::string> warnings_;
};

/// Bridge to an external UMAP implementation. UMAP has no out-of-sample
/// transform here, so new points are placed at their nearest fitted point.
class ExternalProjector final : public Projector {
public:
  using Fn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;
  ExternalProjector(std::string name, nlohmann::json params, Fn fn)
      : name_(std::move(name)), params_(std::move(params)), fn_(std::move(fn)) {
    if (!fn_) throw CapabilityError("projector '" + name_ + "' is not available");
  }
  std::string id() const override { return name_; }
  Eigen::MatrixXd fit_transform(const Eigen::MatrixXd& w) override {
    fitted_w_ = w;
    coords_ = fn_(w);
    if (coords_.rows() != w.rows() || coords_.cols() != 2) throw IntegrityError("projector returned wrong shape");
    return coords_;
  }
  Eigen::MatrixXd transform(const Eigen::MatrixXd& w) const override {
    Eigen::MatrixXd out(w.rows(), 2);
    for (Eigen::Index i = 0; i < w.rows(); ++i) out.row(i) = coords_.row(static_cast<Eigen::Index>(nearest(w.row(i).transpose(), fitted_w_, 1)[0].index));
    return out;
  }
  nlohmann::json state() const override { return {{"id", name_}, {"params", params_}}; }

private:
  std::string name_;
  nlohmann::json params_;
  Fn fn_;
  Eigen::MatrixXd fitted_w_, coords_;
};

/// Signed, scaled terms over atlas ids or literal vectors.
struct VectorExpression {
  struct Term {
    double coefficient;
    std::string id;                       // empty for a literal
    std::optional<std::vector<double>> literal;
  };
  std::vector<Term> terms;
};

/// Grammar: expr := term (('+' | '-') term)* ; term := [number '*'] atom ;
/// atom := identifier | '[' number (',' number)* ']'. Identifiers are
/// [A-Za-z0-9_.:#]+; a leading '-' negates the first term.
inline VectorExpression parse_expression(const std::string& text) {
  VectorExpression e;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  auto number = [&]() -> std::optional<double> {
    skip();
    double v;
    auto [p, ec] = std::from_chars(text.data() + i, text.data() + text.size(), v);
    if (ec != std::errc()) return std::nullopt;
    i = static_cast<std::size_t>(p - text.data());
    return v;
  };
  auto ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == ':' || c == '#'; };
  double sign = 1.0;
  skip();
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) {
    sign = text[i] == '-' ? -1.0 : 1.0;
    ++i;
  }
  while (true) {
    skip();
    VectorExpression::Term t{sign, "", std::nullopt};
    // Optional numeric coefficient followed by '*'.
    const std::size_t save = i;
    if (auto c = number()) {
      skip();
      if (i < text.size() && text[i] == '*') {
        ++i;
        t.coefficient *= *c;
        skip();
      } else {
        i = save;
      }
    }
    if (i < text.size() && text[i] == '[') {
      ++i;
      std::vector<double> lit;
      while (true) {
        auto v = number();
        if (!v) throw ArgumentError("vector expression: bad literal at offset " + std::to_string(i));
        lit.push_back(*v);
        skip();
        if (i < text.size() && text[i] == ',') {
          ++i;
          continue;
        }
        if (i < text.size() && text[i] == ']') {
          ++i;
          break;
        }
        throw ArgumentError("vector expression: unterminated literal");
      }
      t.literal = std::move(lit);
    } else {
      const std::size_t start = i;
      while (i < text.size() && ident_char(text[i])) ++i;
      if (i == start) throw ArgumentError("vector expression: expected a term at offset " + std::to_string(start));
      t.id = text.substr(start, i - start);
    }
    e.terms.push_back(std::move(t));
    skip();
    if (i == text.size()) break;
    if (text[i] != '+' && text[i] != '-') throw ArgumentError("vector expression: expected '+' or '-' at offset " + std::to_string(i));
    sign = text[i] == '-' ? -1.0 : 1.0;
    ++i;
  }
  return e;
}

/// Coefficients are merged per id first, then terms are summed in sorted id
/// order (literals last, in order of appearance) in double precision. The
/// result is therefore independent of term order, and a - a + b is b exactly.
inline Eigen::VectorXf evaluate_expression(const VectorExpression& e,
                                           const std::function<Eigen::VectorXf(const std::string&)>& resolve) {
  if (e.terms.empty()) throw ArgumentError("vector expression: no terms");
  std::map<std::string, double> coef;
  std::vector<std::pair<double, const std::vector<double>*>> literals;
  for (const auto& t : e.terms) {
    if (t.literal) literals.emplace_back(t.coefficient, &*t.literal);
    else coef[t.id] += t.coefficient;
  }
  std::optional<Eigen::VectorXd> acc;
  auto add = [&](double c, const Eigen::VectorXd& v) {
    if (!acc) acc = Eigen::VectorXd::Zero(v.size());
    if (acc->size() != v.size()) throw ArgumentError("vector expression: dimension mismatch");
    if (c != 0.0) *acc += c * v;
  };
  for (const auto& [id, c] : coef) add(c, resolve(id).cast<double>());
  for (const auto& [c, lit] : literals)
    add(c, Eigen::Map<const Eigen::VectorXd>(lit->data(), static_cast<Eigen::Index>(lit->size())));
  return acc->cast<float>();
}

} // namespace pathgan::latent
