#pragma once

// Reader-study sessions: 50 items (25 generated, 25 real) rated 1..5 for
// realness. Truth stays server-side until the session result is requested.
// Every mutation is appended to <log_dir>/<session>.jsonl and can be replayed.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pathgan/latent/analysis.hpp"
#include "pathgan/metrics/plot.hpp"
#include "pathgan/metrics/roc.hpp"

namespace pathgan::service {

inline constexpr int kStudyItems = 50;
inline constexpr int kStudyGenerated = 25;
inline constexpr int kStudyCurated = 12;
inline constexpr int kRealNeighborPool = 3;

struct StudyCorpus {
  std::vector<std::string> gen_ids;
  Eigen::MatrixXd gen_features;
  std::vector<std::string> real_ids;
  Eigen::MatrixXd real_features;
  /// Explicit hand-picked generated ids; empty selects the default heuristic.
  std::vector<std::string> curated;

  void validate() const {
    if (gen_ids.size() != static_cast<std::size_t>(gen_features.rows()) ||
        real_ids.size() != static_cast<std::size_t>(real_features.rows()))
      throw ConfigError("study corpus: ids and features disagree");
    if (gen_ids.size() < static_cast<std::size_t>(kStudyGenerated))
      throw ConfigError("study corpus: need at least 25 generated images");
    if (real_ids.size() < static_cast<std::size_t>(kStudyItems - kStudyGenerated))
      throw ConfigError("study corpus: need at least 25 real images");
  }
};

struct StudyItem {
  std::string item_id;
  std::string image_id;
  bool real = false;
  /// "curated" / "nearest-distance" for generated items, "neighbor" for real.
  std::string mode;
};

inline nlohmann::json item_json(const StudyItem& i) {
  return {{"item_id", i.item_id}, {"image_id", i.image_id}, {"real", i.real}, {"mode", i.mode}};
}

inline StudyItem item_from_json(const nlohmann::json& j) {
  return {j.at("item_id"), j.at("image_id"), j.at("real"), j.at("mode")};
}

/// Deterministic item selection for one session seed.
inline std::vector<StudyItem> select_study_items(const StudyCorpus& c, std::uint64_t seed) {
  c.validate();
  Rng rng(seed);
  const auto ng = static_cast<std::size_t>(c.gen_features.rows());
  // Distance from every generated image to its nearest real image.
  std::vector<double> nn_dist(ng);
  for (std::size_t i = 0; i < ng; ++i)
    nn_dist[i] = latent::nearest(c.gen_features.row(static_cast<Eigen::Index>(i)).transpose(), c.real_features, 1)[0].distance;
  std::vector<std::size_t> chosen;
  std::vector<std::string> mode;
  std::set<std::size_t> used;
  if (!c.curated.empty()) {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < ng; ++i) idx[c.gen_ids[i]] = i;
    for (const auto& id : c.curated) {
      auto it = idx.find(id);
      if (it == idx.end()) throw NotFoundError("curated id '" + id + "' is not a generated image");
      if (used.insert(it->second).second && chosen.size() < static_cast<std::size_t>(kStudyCurated)) {
        chosen.push_back(it->second);
        mode.push_back("curated");
      }
    }
    if (chosen.size() < static_cast<std::size_t>(kStudyCurated)) throw ConfigError("curated list has fewer than 12 ids");
  } else {
    // Stand-in for hand selection: a seeded draw from the images whose
    // features lie closest to the real feature mean.
    const Eigen::RowVectorXd mu = c.real_features.colwise().mean();
    std::vector<std::size_t> order(ng);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(ng);
    for (std::size_t i = 0; i < ng; ++i) score[i] = (c.gen_features.row(static_cast<Eigen::Index>(i)) - mu).squaredNorm();
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] < score[b]; });
    std::vector<std::size_t> top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(ng, 2 * kStudyCurated)));
    std::shuffle(top.begin(), top.end(), rng);
    for (int k = 0; k < kStudyCurated; ++k) {
      chosen.push_back(top[static_cast<std::size_t>(k)]);
      used.insert(top[static_cast<std::size_t>(k)]);
      mode.push_back("curated");
    }
  }
  std::vector<std::size_t> by_dist(ng);
  std::iota(by_dist.begin(), by_dist.end(), 0);
  std::stable_sort(by_dist.begin(), by_dist.end(), [&](auto a, auto b) { return nn_dist[a] < nn_dist[b]; });
  for (auto i : by_dist) {
    if (chosen.size() == static_cast<std::size_t>(kStudyGenerated)) break;
    if (used.insert(i).second) {
      chosen.push_back(i);
      mode.push_back("nearest-distance");
    }
  }
  std::vector<StudyItem> items;
  std::set<std::size_t> real_used;
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    items.push_back({"", c.gen_ids[chosen[k]], false, mode[k]});
    // A real counterpart drawn among the closest unused real neighbours.
    const auto nb = latent::nearest(c.gen_features.row(static_cast<Eigen::Index>(chosen[k])).transpose(), c.real_features,
                                    c.real_ids.size());
    std::vector<std::size_t> pool;
    for (const auto& n : nb) {
      if (!real_used.count(n.index)) pool.push_back(n.index);
      if (pool.size() == static_cast<std::size_t>(kRealNeighborPool)) break;
    }
    const auto pick = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    real_used.insert(pick);
    items.push_back({"", c.real_ids[pick], true, "neighbor"});
  }
  std::shuffle(items.begin(), items.end(), rng);
  for (std::size_t i = 0; i < items.size(); ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "item-%02zu", i);
    items[i].item_id = buf;
  }
  return items;
}

struct RateOutcome {
  bool duplicate = false;
  int remaining = 0;
};

class StudySession {
public:
  StudySession(std::string id, std::uint64_t seed, std::vector<StudyItem> items)
      : id_(std::move(id)), seed_(seed), items_(std::move(items)) {
    if (items_.size() != static_cast<std::size_t>(kStudyItems)) throw ConfigError("study session must hold 50 items");
  }

  const std::string& id() const { return id_; }
  std::uint64_t seed() const { return seed_; }
  bool complete() const { return complete_; }
  const std::vector<StudyItem>& items() const { return items_; }

  const StudyItem& item(const std::string& item_id) const {
    for (const auto& i : items_)
      if (i.item_id == item_id) return i;
    throw NotFoundError("unknown study item '" + item_id + "'");
  }

  /// A repeated submission with the same idempotency key is a no-op;
  /// anything else on a rated item is refused.
  RateOutcome rate(const std::string& item_id, int rating, const std::string& key) {
    std::lock_guard lock(mu_);
    if (rating < 1 || rating > 5) throw ArgumentError("rating must be an integer in [1, 5]");
    item(item_id);
    if (complete_) throw StateError("session " + id_ + " is closed");
    auto it = ratings_.find(item_id);
    if (it != ratings_.end()) {
      if (!key.empty() && keys_[item_id] == key && it->second == rating) return {true, remaining_locked()};
      throw StateError("item " + item_id + " is already rated");
    }
    ratings_[item_id] = rating;
    keys_[item_id] = key;
    return {false, remaining_locked()};
  }

  /// ROC over (rating, truth); closes the session.
  metrics::RocResult close() {
    std::lock_guard lock(mu_);
    if (static_cast<int>(ratings_.size()) != kStudyItems)
      throw StateError("session " + id_ + " has " + std::to_string(kStudyItems - ratings_.size()) + " unrated items");
    complete_ = true;
    return roc_locked();
  }

  metrics::RocResult roc() const {
    std::lock_guard lock(mu_);
    if (!complete_) throw StateError("session " + id_ + " is not complete");
    return roc_locked();
  }

  std::optional<int> rating(const std::string& item_id) const {
    std::lock_guard lock(mu_);
    auto it = ratings_.find(item_id);
    return it == ratings_.end() ? std::nullopt : std::optional<int>(it->second);
  }

  std::optional<int> next_unrated() const {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < items_.size(); ++i)
      if (!ratings_.count(items_[i].item_id)) return static_cast<int>(i);
    return std::nullopt;
  }

  /// Client view: no truth, no selection mode, no image id.
  nlohmann::json public_view() const {
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const auto r = rating(items_[i].item_id);
      items.push_back({{"item_id", items_[i].item_id},
                       {"index", i},
                       {"rated", r.has_value()},
                       {"rating", r ? nlohmann::json(*r) : nlohmann::json(nullptr)}});
    }
    const auto next = next_unrated();
    return {{"session_id", id_},
            {"status", complete() ? "complete" : "open"},
            {"next_unrated", next ? nlohmann::json(*next) : nlohmann::json(nullptr)},
            {"items", items}};
  }

  nlohmann::json result_view() const {
    const auto r = roc();
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : r.curve) curve.push_back({{"threshold", p.threshold}, {"fpr", p.fpr}, {"tpr", p.tpr}});
    nlohmann::json items = nlohmann::json::array();
    for (const auto& i : items_)
      items.push_back({{"item_id", i.item_id}, {"image_id", i.image_id}, {"truth", i.real ? "real" : "generated"},
                       {"mode", i.mode}, {"rating", *rating(i.item_id)}});
    return {{"session_id", id_},
            {"roc", {{"auc", r.auc}, {"positives", r.positives}, {"negatives", r.negatives}, {"curve", curve}}},
            {"svg", metrics::svg_roc(r, "Reader study " + id_)},
            {"items", items}};
  }

  /// (rating, is_real) pairs of a complete session.
  std::vector<std::pair<double, bool>> scored() const {
    std::vector<std::pair<double, bool>> out;
    for (const auto& i : items_) out.emplace_back(*rating(i.item_id), i.real);
    return out;
  }

private:
  int remaining_locked() const { return kStudyItems - static_cast<int>(ratings_.size()); }
  metrics::RocResult roc_locked() const {
    std::vector<double> s;
    std::vector<bool> t;
    for (const auto& i : items_) {
      s.push_back(ratings_.at(i.item_id));
      t.push_back(i.real);
    }
    return metrics::roc_auc(s, t);
  }

  std::string id_;
  std::uint64_t seed_;
  std::vector<StudyItem> items_;
  std::map<std::string, int> ratings_;
  std::map<std::string, std::string> keys_;
  bool complete_ = false;
  mutable std::mutex mu_;
};

class StudyManager {
public:
  StudyManager(StudyCorpus corpus, std::filesystem::path log_dir = {})
      : corpus_(std::move(corpus)), log_dir_(std::move(log_dir)) {
    corpus_.validate();
    if (!log_dir_.empty()) {
      std::filesystem::create_directories(log_dir_);
      replay();
    }
  }

  StudySession& create(std::uint64_t seed) {
    auto items = select_study_items(corpus_, seed);
    std::lock_guard lock(mu_);
    const std::string id = "study-" + std::to_string(seed) + "-" + std::to_string(counter_++);
    nlohmann::json ev = {{"event", "create"}, {"session_id", id}, {"seed", seed}, {"items", nlohmann::json::array()}};
    for (const auto& i : items) ev["items"].push_back(item_json(i));
    append(id, ev);
    auto s = std::make_unique<StudySession>(id, seed, std::move(items));
    return *sessions_.emplace(id, std::move(s)).first->second;
  }

  StudySession& get(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown study session '" + id + "'");
    return *it->second;
  }

  RateOutcome rate(const std::string& id, const std::string& item_id, int rating, const std::string& key) {
    auto& s = get(id);
    auto out = s.rate(item_id, rating, key);
    if (!out.duplicate) append(id, {{"event", "rate"}, {"item_id", item_id}, {"rating", rating}, {"key", key}});
    return out;
  }

  nlohmann::json result(const std::string& id) {
    auto& s = get(id);
    if (!s.complete()) {
      s.close();
      append(id, {{"event", "result"}});
    }
    return s.result_view();
  }

  /// Per-session AUCs plus one ROC over every completed session's ratings.
  nlohmann::json pooled() {
    std::vector<double> scores;
    std::vector<bool> truth;
    nlohmann::json sessions = nlohmann::json::array();
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) {
      if (!s->complete()) continue;
      sessions.push_back({{"session_id", id}, {"auc", s->roc().auc}});
      for (auto [r, t] : s->scored()) {
        scores.push_back(r);
        truth.push_back(t);
      }
    }
    nlohmann::json pooled = nullptr;
    if (!scores.empty()) {
      const auto r = metrics::roc_auc(scores, truth);
      nlohmann::json curve = nlohmann::json::array();
      for (const auto& p : r.curve) curve.push_back({{"threshold", p.threshold}, {"fpr", p.fpr}, {"tpr", p.tpr}});
      pooled = {{"auc", r.auc}, {"positives", r.positives}, {"negatives", r.negatives}, {"curve", curve}};
    }
    return {{"sessions", sessions}, {"pooled", pooled}};
  }

  const StudyCorpus& corpus() const { return corpus_; }

private:
  void append(const std::string& id, const nlohmann::json& ev) {
    if (log_dir_.empty()) return;
    std::lock_guard lock(log_mu_);
    std::ofstream out(log_dir_ / (id + ".jsonl"), std::ios::app);
    if (!out) throw IntegrityError("cannot append study log for " + id);
    out << ev.dump() << '\n';
  }

  void replay() {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(log_dir_))
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f);
      std::string line;
      StudySession* s = nullptr;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto ev = nlohmann::json::parse(line);
        const auto kind = ev.at("event").get<std::string>();
        if (kind == "create") {
          std::vector<StudyItem> items;
          for (const auto& j : ev.at("items")) items.push_back(item_from_json(j));
          const auto id = ev.at("session_id").get<std::string>();
          s = sessions_.emplace(id, std::make_unique<StudySession>(id, ev.at("seed").get<std::uint64_t>(), std::move(items)))
                  .first->second.get();
          ++counter_;
        } else if (!s) {
          throw IntegrityError(f.string() + ": event before create");
        } else if (kind == "rate") {
          s->rate(ev.at("item_id"), ev.at("rating"), ev.value("key", ""));
        } else if (kind == "result") {
          s->close();
        }
      }
    }
  }

  StudyCorpus corpus_;
  std::filesystem::path log_dir_;
  std::map<std::string, std::unique_ptr<StudySession>> sessions_;
  std::uint64_t counter_ = 0;
  std::mutex mu_;
  std::mutex log_mu_;
};

} // namespace pathgan::service
