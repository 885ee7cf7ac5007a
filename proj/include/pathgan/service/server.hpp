#pragma once

// Explorer/study service. `Service::dispatch` is the whole API as a pure
// function of (method, path, query, body); `mount` puts it on cpp-httplib.

#include <atomic>
#include <mutex>
#include <regex>

#include <Eigen/Dense>

#include "pathgan/data/dataset.hpp"
#include "pathgan/latent/atlas.hpp"
#include "pathgan/service/schema.hpp"
#include "pathgan/service/study.hpp"
#include "pathgan/train/config.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro that
// collides with Eigen parameter names.
#include <httplib.h>

namespace pathgan::service {

struct Response {
  int status = 200;
  nlohmann::json body;
};

inline nlohmann::json image_json(const Image& im) {
  const std::string png = encode_png(im);
  return {{"format", "png"},
          {"width", im.width},
          {"height", im.height},
          {"data", httplib::detail::base64_encode(png)},
          {"digest", digest_hex(png)}};
}

inline Response error_response(int status, const std::string& code, const std::string& message) {
  return {status, {{"error", {{"code", code}, {"message", message}}}}};
}

struct RealCorpus {
  std::vector<std::string> ids;
  std::vector<Image> images;
  std::vector<std::string> labels;
};

/// Real patches of one dataset split, labelled by tissue class when known.
inline RealCorpus real_corpus_from(const data::PatchDataset& ds, const std::string& split = "") {
  RealCorpus rc;
  for (std::size_t i = 0; i < ds.patches.size(); ++i) {
    if (!split.empty() && ds.split[i] != split) continue;
    const auto& p = ds.patches[i];
    rc.ids.push_back(p.id);
    rc.images.push_back(p.image);
    rc.labels.push_back(p.tissue ? std::string(data::to_string(*p.tissue)) : "unlabeled");
  }
  return rc;
}

struct ServiceOptions {
  std::uint64_t seed = 0;
  std::filesystem::path study_dir;
  std::vector<std::string> curated;
  std::size_t label_k = 10;
  int max_interpolation_steps = 64;
};

/// serve --config FILE
struct ServiceConfig {
  std::string checkpoint;
  std::string atlas;
  std::string host = "127.0.0.1";
  int port = 8080;
  nlohmann::json feature_space = {{"extractor", "test-projection"}};
  /// Dataset directory holding the real study/neighbour corpus.
  std::string real_dataset;
  std::string real_split;
  std::string study_dir;
  /// Optional file with one curated generated id per line.
  std::string curated_file;
  std::uint64_t seed = 0;
};

inline ServiceConfig service_config_from_json(const nlohmann::json& j) {
  train::reject_unknown_keys(j, {"checkpoint", "atlas", "host", "port", "feature_space", "real_dataset", "real_split",
                                 "study_dir", "curated_file", "seed"},
                             "service config");
  ServiceConfig c;
  c.checkpoint = j.at("checkpoint").get<std::string>();
  c.atlas = j.at("atlas").get<std::string>();
  c.real_dataset = j.at("real_dataset").get<std::string>();
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.feature_space = j.value("feature_space", c.feature_space);
  c.real_split = j.value("real_split", c.real_split);
  c.study_dir = j.value("study_dir", c.study_dir);
  c.curated_file = j.value("curated_file", c.curated_file);
  c.seed = j.value("seed", c.seed);
  if (c.port < 0 || c.port > 65535) throw ConfigError("service config: port out of range");
  return c;
}

inline std::vector<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open id list " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (!line.empty() && line[0] != '#') ids.push_back(line);
  }
  return ids;
}

class Service {
public:
  Service(model::Gan gan, std::string checkpoint_digest, latent::LatentAtlas atlas,
          std::shared_ptr<const features::FeatureExtractor> extractor, RealCorpus real, ServiceOptions opt = {})
      : gan_(std::move(gan)), digest_(std::move(checkpoint_digest)), atlas_(std::move(atlas)),
        extractor_(std::move(extractor)), real_(std::move(real)), opt_(std::move(opt)) {
    if (atlas_.checkpoint_digest() != digest_)
      throw IntegrityError("atlas was built from checkpoint " + atlas_.checkpoint_digest() + ", service loaded " + digest_);
    if (atlas_.latent_dim() != gan_.config.latent_dim) throw IntegrityError("atlas latent dimension disagrees with the model");
    if (!extractor_) throw ConfigError("service: no feature extractor");
    if (atlas_.features().space.name != extractor_->space().name ||
        atlas_.features().space.config_digest != extractor_->space().config_digest)
      throw IntegrityError("atlas features were computed in another feature space");
    if (real_.ids.size() != real_.images.size() || real_.ids.size() != real_.labels.size())
      throw ConfigError("service: real corpus ids, images and labels disagree");
    if (real_.ids.empty()) throw ConfigError("service: empty real corpus");
    real_features_ = extractor_->extract(real_.images, real_.ids);
    for (std::size_t i = 0; i < real_.ids.size(); ++i) real_index_[real_.ids[i]] = i;

    StudyCorpus sc;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < atlas_.points().size(); ++i)
      if (atlas_.points()[i].origin == "sample") {
        sc.gen_ids.push_back(atlas_.points()[i].id);
        rows.push_back(static_cast<Eigen::Index>(i));
      }
    const Eigen::MatrixXd af = atlas_.features().matrix();
    sc.gen_features = af(rows, Eigen::all);
    sc.real_ids = real_.ids;
    sc.real_features = real_features_.matrix();
    sc.curated = opt_.curated;
    if (sc.gen_ids.size() >= static_cast<std::size_t>(kStudyGenerated) &&
        sc.real_ids.size() >= static_cast<std::size_t>(kStudyItems - kStudyGenerated))
      studies_ = std::make_unique<StudyManager>(std::move(sc), opt_.study_dir);
  }

  /// Loads checkpoint and atlas from disk and refuses a mismatched pair.
  static Service open(const std::filesystem::path& checkpoint, const std::filesystem::path& atlas_stem,
                      std::shared_ptr<const features::FeatureExtractor> extractor, RealCorpus real, ServiceOptions opt = {}) {
    auto ck = model::load_checkpoint(checkpoint.string());
    auto atlas = latent::LatentAtlas::load(atlas_stem);
    return Service(std::move(ck.gan), ck.digest, std::move(atlas), std::move(extractor), std::move(real), std::move(opt));
  }

  static Service open(const ServiceConfig& c) {
    ServiceOptions opt;
    opt.seed = c.seed;
    opt.study_dir = c.study_dir;
    if (!c.curated_file.empty()) opt.curated = read_id_list(c.curated_file);
    return open(c.checkpoint, c.atlas, features::make_extractor(c.feature_space),
                real_corpus_from(data::load_dataset(c.real_dataset), c.real_split), std::move(opt));
  }

  Response dispatch(const std::string& method, const std::string& path,
                    const std::map<std::string, std::string>& query = {}, const std::string& body = "") {
    try {
      nlohmann::json req = nlohmann::json::object();
      if (method == "POST" && !body.empty()) {
        try {
          req = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception&) {
          return error_response(400, "bad_request", "request body is not valid JSON");
        }
        if (!req.is_object()) return error_response(400, "bad_request", "request body must be a JSON object");
      }
      return route(method, path, query, req);
    } catch (const ArgumentError& e) {
      return error_response(400, "invalid_argument", e.what());
    } catch (const nlohmann::json::exception& e) {
      return error_response(400, "invalid_argument", e.what());
    } catch (const NotFoundError& e) {
      return error_response(404, "not_found", e.what());
    } catch (const StateError& e) {
      return error_response(409, "conflict", e.what());
    } catch (const CapabilityError& e) {
      return error_response(422, "unsupported", e.what());
    } catch (const std::exception& e) {
      return error_response(500, "internal", e.what());
    }
  }

  const std::string& checkpoint_digest() const { return digest_; }
  const latent::LatentAtlas& atlas() const { return atlas_; }
  const features::FeatureMatrix& real_features() const { return real_features_; }

  /// Routes every GET/POST on `server` through dispatch. An Idempotency-Key
  /// header stands in for a missing "idempotency_key" body field.
  void mount(httplib::Server& server) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> q;
      for (const auto& [k, v] : req.params) q[k] = v;
      std::string body = req.body;
      if (req.has_header("Idempotency-Key") && req.method == "POST") {
        try {
          auto j = nlohmann::json::parse(body.empty() ? "{}" : body);
          if (j.is_object() && !j.contains("idempotency_key")) {
            j["idempotency_key"] = req.get_header_value("Idempotency-Key");
            body = j.dump();
          }
        } catch (const nlohmann::json::exception&) {
        }
      }
      const auto r = dispatch(req.method, req.path, q, body);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Get(R"(/.*)", handler);
    server.Post(R"(/.*)", handler);
  }

private:
  static std::uint64_t as_seed(const nlohmann::json& v, const char* what) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ArgumentError(std::string(what) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  Eigen::VectorXf w_from(const nlohmann::json& v) const {
    if (v.is_string()) return atlas_.w(v.get<std::string>());
    if (v.is_array()) {
      if (static_cast<int>(v.size()) != gan_.config.latent_dim)
        throw ArgumentError("w must have " + std::to_string(gan_.config.latent_dim) + " entries");
      Eigen::VectorXf w(gan_.config.latent_dim);
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ArgumentError("w entries must be numbers");
        w(static_cast<Eigen::Index>(i)) = v[i].get<float>();
      }
      if (!w.allFinite()) throw ArgumentError("w entries must be finite");
      return w;
    }
    throw ArgumentError("expected an atlas id or a latent vector");
  }

  static nlohmann::json w_json(const Eigen::VectorXf& w) { return std::vector<float>(w.data(), w.data() + w.size()); }

  Image render(const Eigen::VectorXf& w) {
    Tensor t({1, gan_.config.latent_dim});
    std::copy(w.data(), w.data() + w.size(), t.data());
    return from_batch(model::synthesize(gan_, t), 0);
  }

  static nlohmann::json point_json(const latent::AtlasPoint& p) {
    nlohmann::json j = {{"id", p.id}, {"label", p.label}, {"x", p.x}, {"y", p.y}, {"origin", p.origin}};
    if (!p.expression.empty()) j["expression"] = p.expression;
    return j;
  }

  StudyManager& studies() {
    if (!studies_) throw CapabilityError("reader study needs at least 25 atlas samples and 25 real images");
    return *studies_;
  }

  Image study_image(const std::string& image_id) {
    auto it = real_index_.find(image_id);
    if (it != real_index_.end()) return real_.images[it->second];
    std::lock_guard lock(model_mu_);
    return render(atlas_.w(image_id));
  }

  Response route(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query,
                 const nlohmann::json& req) {
    static const std::regex study_re(R"(^/study/([^/]+)$)");
    static const std::regex item_re(R"(^/study/([^/]+)/items/([^/]+)/image$)");
    static const std::regex rate_re(R"(^/study/([^/]+)/rate$)");
    static const std::regex result_re(R"(^/study/([^/]+)/result$)");
    std::smatch m;

    if (method == "GET" && path == "/health")
      return {200, {{"status", "ok"}, {"checkpoint_digest", digest_}, {"atlas_points", atlas_.points().size()}}};

    if (method == "POST" && path == "/generate") {
      nlohmann::json out;
      Eigen::VectorXf w;
      std::lock_guard lock(model_mu_);
      if (req.contains("w")) {
        w = w_from(req["w"]);
      } else if (req.contains("seed")) {
        const auto seed = as_seed(req["seed"], "seed");
        const Tensor wt = model::map_latent(gan_, model::sample_z(1, gan_.config.latent_dim, seed));
        w = Eigen::Map<const Eigen::VectorXf>(wt.data(), gan_.config.latent_dim);
        out["seed"] = seed;
      } else {
        throw ArgumentError("generate needs 'seed' or 'w'");
      }
      out["w"] = w_json(w);
      out["image"] = image_json(render(w));
      return {200, out};
    }

    if (method == "POST" && path == "/interpolate") {
      if (!req.contains("from") || !req.contains("to")) throw ArgumentError("interpolate needs 'from' and 'to'");
      const int steps = req.value("steps", 8);
      if (steps < 2 || steps > opt_.max_interpolation_steps)
        throw ArgumentError("steps must be in [2, " + std::to_string(opt_.max_interpolation_steps) + "]");
      std::lock_guard lock(model_mu_);
      const auto path_w = latent::interpolate(w_from(req["from"]), w_from(req["to"]), steps);
      nlohmann::json out = nlohmann::json::array();
      for (int i = 0; i < steps; ++i)
        out.push_back({{"t", static_cast<double>(i) / (steps - 1)}, {"w", w_json(path_w[static_cast<std::size_t>(i)])},
                       {"image", image_json(render(path_w[static_cast<std::size_t>(i)]))}});
      return {200, {{"steps", out}}};
    }

    if (method == "POST" && path == "/vecop") {
      if (!req.contains("expression") || !req["expression"].is_string()) throw ArgumentError("vecop needs an 'expression' string");
      const std::string text = req["expression"];
      const auto expr = latent::parse_expression(text);
      std::lock_guard lock(model_mu_);
      const Eigen::VectorXf w = atlas_.evaluate(expr);
      if (!w.allFinite()) throw ArgumentError("expression produced a non-finite vector");
      const Image im = render(w);
      const auto feat = extractor_->extract(std::span<const Image>(&im, 1));
      const auto& p = atlas_.register_point(w, feat, real_features_, real_.labels, text, opt_.label_k);
      nlohmann::json operands = nlohmann::json::array();
      for (const auto& t : expr.terms)
        if (!t.id.empty()) operands.push_back(point_json(atlas_.point(t.id)));
      return {200, {{"expression", text}, {"w", w_json(w)}, {"image", image_json(im)}, {"point", point_json(p)}, {"operands", operands}}};
    }

    if (method == "GET" && path == "/atlas/points") {
      std::lock_guard lock(model_mu_);
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : atlas_.points()) pts.push_back(point_json(p));
      return {200, {{"projector", atlas_.projector_id()}, {"checkpoint_digest", digest_}, {"points", pts}}};
    }

    if (method == "GET" && path == "/atlas/neighbors") {
      auto it = query.find("image");
      if (it == query.end()) throw ArgumentError("neighbors needs ?image=<atlas id>");
      std::size_t k = 5;
      if (auto kq = query.find("k"); kq != query.end()) {
        try {
          k = static_cast<std::size_t>(std::stoul(kq->second));
        } catch (const std::exception&) {
          throw ArgumentError("k must be a positive integer");
        }
        if (k < 1) throw ArgumentError("k must be a positive integer");
      }
      const bool with_images = query.count("images") && query.at("images") == "1";
      std::lock_guard lock(model_mu_);
      const auto& fm = atlas_.features();
      Eigen::Index row = -1;
      for (std::size_t i = 0; i < fm.ids.size(); ++i)
        if (fm.ids[i] == it->second) row = static_cast<Eigen::Index>(i);
      if (row < 0) throw NotFoundError("unknown atlas id '" + it->second + "'");
      const auto nb = latent::nearest(fm.matrix().row(row).transpose(), real_features_.matrix(), k);
      nlohmann::json out = nlohmann::json::array();
      for (std::size_t r = 0; r < nb.size(); ++r) {
        nlohmann::json j = {{"id", real_.ids[nb[r].index]}, {"distance", nb[r].distance}, {"rank", r + 1},
                            {"label", real_.labels[nb[r].index]}};
        if (with_images) j["image"] = image_json(real_.images[nb[r].index]);
        out.push_back(j);
      }
      return {200, {{"image", it->second}, {"neighbors", out}}};
    }

    if (method == "POST" && path == "/study") {
      const auto seed = req.contains("seed") ? as_seed(req["seed"], "seed") : opt_.seed + study_counter_++;
      auto& s = studies().create(seed);
      return {201, s.public_view()};
    }
    if (method == "GET" && std::regex_match(path, m, item_re)) {
      const auto& item = studies().get(m[1]).item(m[2]);
      return {200, {{"item_id", item.item_id}, {"image", image_json(study_image(item.image_id))}}};
    }
    if (method == "POST" && std::regex_match(path, m, rate_re)) {
      if (!req.contains("item_id") || !req["item_id"].is_string()) throw ArgumentError("rate needs 'item_id'");
      if (!req.contains("rating") || !req["rating"].is_number_integer()) throw ArgumentError("rating must be an integer in [1, 5]");
      const std::string key = req.value("idempotency_key", "");
      const int rating = req["rating"];
      const auto r = studies().rate(m[1], req["item_id"], rating, key);
      return {200, {{"session_id", m[1].str()}, {"item_id", req["item_id"]}, {"rating", rating}, {"duplicate", r.duplicate},
                    {"remaining", r.remaining}}};
    }
    if (method == "GET" && std::regex_match(path, m, result_re)) return {200, studies().result(m[1])};
    if (method == "GET" && std::regex_match(path, m, study_re)) return {200, studies().get(m[1]).public_view()};
    if (method == "GET" && path == "/studies/roc") return {200, studies().pooled()};

    return error_response(404, "not_found", "no route for " + method + " " + path);
  }

  model::Gan gan_;
  std::string digest_;
  latent::LatentAtlas atlas_;
  std::shared_ptr<const features::FeatureExtractor> extractor_;
  RealCorpus real_;
  ServiceOptions opt_;
  features::FeatureMatrix real_features_;
  std::map<std::string, std::size_t> real_index_;
  std::unique_ptr<StudyManager> studies_;
  std::atomic<std::uint64_t> study_counter_{0};
  std::mutex model_mu_;
};

} // namespace pathgan::service
