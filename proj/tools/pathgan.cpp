#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "pathgan/pathgan.hpp"

using namespace pathgan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ImageSet {
  std::vector<std::string> ids;
  std::vector<Image> images;
  std::vector<std::string> labels;
};

// A dataset directory (has manifest.json) or any directory of PNGs.
ImageSet load_images(const fs::path& dir, const std::string& split = "") {
  ImageSet s;
  if (fs::exists(dir / "manifest.json")) {
    const auto rc = service::real_corpus_from(data::load_dataset(dir), split);
    return {rc.ids, rc.images, rc.labels};
  }
  for (auto& src : data::read_source_dir(dir)) {
    s.ids.push_back(src.id);
    s.labels.push_back(src.label ? std::string(data::to_string(*src.label)) : "unlabeled");
    s.images.push_back(std::move(src.pixels));
  }
  return s;
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

void write_json(const std::string& path, const json& j) {
  if (path.empty()) return;
  metrics::write_text(path, j.dump(2) + "\n");
}

json extractor_config(const std::string& space, int input_size, int dim, std::uint64_t seed, const std::string& csv) {
  json j = {{"extractor", space}};
  if (space == "test-projection") {
    j["input_size"] = input_size;
    j["dimension"] = dim;
    j["seed"] = seed;
  }
  if (space == "cellular") j["csv"] = csv;
  return j;
}

// {"features": "x.feat"} or {"synthetic": {"n", "image_size", "palette_shift", "seed"}}
features::FeatureMatrix corpus_from_spec(const json& j, const fs::path& base, const features::FeatureExtractor& space) {
  if (j.is_string()) return features::load_features((base / j.get<std::string>()).string());
  if (j.contains("features")) return features::load_features((base / j["features"].get<std::string>()).string());
  if (j.contains("synthetic")) {
    const auto& s = j["synthetic"];
    metrics::SyntheticCorpusSpec c;
    c.n = s.value("n", c.n);
    c.image_size = s.value("image_size", c.image_size);
    c.palette_shift = s.value("palette_shift", c.palette_shift);
    c.seed = s.value("seed", c.seed);
    return metrics::synthetic_corpus_features(c, space);
  }
  throw ConfigError("corpus entry needs 'features' or 'synthetic'");
}

void emit_reports(const std::vector<metrics::MetricReport>& reports, const std::string& out_dir, const std::string& kind) {
  json arr = json::array();
  for (const auto& r : reports) {
    arr.push_back(metrics::to_json(r));
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      metrics::write_text((fs::path(out_dir) / (kind + "-" + r.metric + ".svg")).string(), metrics::svg_curve(r));
    }
  }
  if (!out_dir.empty()) write_json((fs::path(out_dir) / (kind + ".json")).string(), arr);
  print(arr);
}

void save_image_dir(const fs::path& dir, const std::vector<Image>& images, const std::vector<std::string>& names) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < images.size(); ++i) write_png((dir / (names[i] + ".png")).string(), images[i]);
}

Tensor w_tensor(const Eigen::VectorXf& w) {
  Tensor t({1, static_cast<std::int64_t>(w.size())});
  std::copy(w.data(), w.data() + w.size(), t.data());
  return t;
}

std::vector<float> to_vec(const Eigen::VectorXf& w) { return {w.data(), w.data() + w.size()}; }

std::function<void()> g_stop;

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"pathgan: tissue GAN training, evaluation and latent analysis"};
  app.require_subcommand(1);

  // data
  auto* data_cmd = app.add_subcommand("data", "Patch datasets")->require_subcommand(1);
  std::string src, out, data_dir;
  int patch = 224, size = 64, classes = 8;
  double overlap = 0.5, coverage = data::kDefaultCoverage, test_fraction = 0.1;
  bool no_augment = false;
  std::uint64_t seed = 0;
  std::int64_t n = 2000;
  float palette_shift = 0.0f;
  std::string counts_csv;
  auto* ingest = data_cmd->add_subcommand("ingest", "Tile, filter and augment source images");
  ingest->add_option("--src", src, "Directory of source PNGs")->required();
  ingest->add_option("--out", out, "Dataset directory")->required();
  ingest->add_option("--patch", patch, "Patch size")->capture_default_str();
  ingest->add_option("--overlap", overlap, "Patch overlap fraction")->capture_default_str();
  ingest->add_option("--coverage", coverage, "Minimum tissue coverage")->capture_default_str();
  ingest->add_option("--test-fraction", test_fraction)->capture_default_str();
  ingest->add_flag("--no-augment", no_augment);
  ingest->add_option("--seed", seed)->capture_default_str();
  auto* synth = data_cmd->add_subcommand("synth", "Render the synthetic archetype dataset");
  synth->add_option("--n", n)->capture_default_str();
  synth->add_option("--size", size)->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();
  synth->add_option("--palette-shift", palette_shift)->capture_default_str();
  synth->add_option("--test-fraction", test_fraction)->capture_default_str();
  synth->add_option("--out", out)->required();
  auto* bins = data_cmd->add_subcommand("bins", "Assign cell-count classes");
  bins->add_option("--data", data_dir)->required();
  bins->add_option("--classes", classes)->capture_default_str();
  bins->add_option("--counts", counts_csv, "CSV image_id,count overriding stored blob counts");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a GAN");
  std::string config_path;
  std::int64_t subsample = -1;
  train_cmd->add_option("--config", config_path)->required();
  train_cmd->add_option("--data", data_dir)->required();
  train_cmd->add_option("--out", out)->required();
  train_cmd->add_option("--subsample", subsample);

  // features
  auto* feat_cmd = app.add_subcommand("features", "Feature matrices")->require_subcommand(1);
  std::string space = "test-projection", images_dir, split, csv;
  int input_size = 64, dim = 64;
  std::uint64_t space_seed = 20190101;
  auto* extract = feat_cmd->add_subcommand("extract", "Featurize a directory of images");
  extract->add_option("--space", space)->check(CLI::IsMember({"test-projection", "convnet-pool3", "cellular"}))->capture_default_str();
  extract->add_option("--images", images_dir)->required();
  extract->add_option("--split", split, "Dataset split (train|test)");
  extract->add_option("--out", out)->required();
  extract->add_option("--input-size", input_size)->capture_default_str();
  extract->add_option("--dim", dim)->capture_default_str();
  extract->add_option("--space-seed", space_seed)->capture_default_str();
  extract->add_option("--csv", csv, "Cellular CSV");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Metrics and experiments")->require_subcommand(1);
  std::string real_f, gen_f, spec_path, ratings, report_out;
  std::int64_t fid_n = 10000;
  int block = 100;
  std::vector<CLI::App*> pair_cmds;
  for (const char* m : {"fid", "kid", "onenn"}) {
    auto* c = eval_cmd->add_subcommand(m, std::string(m) + " between two feature files");
    c->add_option("--real", real_f)->required();
    c->add_option("--gen", gen_f)->required();
    c->add_option("--seed", seed)->capture_default_str();
    c->add_option("--out", report_out, "Report JSON path");
    if (std::string(m) == "fid") c->add_option("--n", fid_n, "Samples per side")->capture_default_str();
    if (std::string(m) == "kid") c->add_option("--block", block)->capture_default_str();
    pair_cmds.push_back(c);
  }
  auto* contam = eval_cmd->add_subcommand("contamination", "Contamination curve");
  auto* consist = eval_cmd->add_subcommand("consistency", "Consistency curve");
  for (auto* c : {contam, consist}) {
    c->add_option("--spec", spec_path)->required();
    c->add_option("--out", report_out, "Directory for JSON and SVG output");
  }
  auto* roc_cmd = eval_cmd->add_subcommand("roc", "ROC of reader ratings");
  roc_cmd->add_option("--ratings", ratings, "CSV rating,truth (truth: real|generated)")->required();
  roc_cmd->add_option("--out", report_out, "SVG path");

  // atlas
  auto* atlas_cmd = app.add_subcommand("atlas", "Latent atlas")->require_subcommand(1);
  std::string ckpt, atlas_stem, from_id, to_id, image_arg, expression;
  int steps = 8, k = 10;
  std::int64_t m_points = 1000;
  bool save_atlas = false;
  auto* abuild = atlas_cmd->add_subcommand("build", "Sample, label and project latents");
  abuild->add_option("--checkpoint", ckpt)->required();
  abuild->add_option("--data", data_dir, "Real dataset for labels")->required();
  abuild->add_option("--out", atlas_stem, "Atlas path stem")->required();
  abuild->add_option("--m", m_points)->capture_default_str();
  abuild->add_option("--seed", seed)->capture_default_str();
  abuild->add_option("-k", k)->capture_default_str();
  auto* ainterp = atlas_cmd->add_subcommand("interpolate", "Linear path between two atlas points");
  ainterp->add_option("--from", from_id)->required();
  ainterp->add_option("--to", to_id)->required();
  ainterp->add_option("--steps", steps)->capture_default_str();
  auto* avecop = atlas_cmd->add_subcommand("vecop", "Evaluate a vector expression");
  avecop->add_option("expression", expression)->required();
  avecop->add_flag("--save", save_atlas, "Register the result and rewrite the atlas");
  avecop->add_option("--data", data_dir, "Real dataset for labelling a registered result");
  auto* aneigh = atlas_cmd->add_subcommand("neighbors", "Closest real images");
  aneigh->add_option("--image", image_arg, "Atlas id or PNG file")->required();
  aneigh->add_option("--data", data_dir, "Real dataset")->required();
  aneigh->add_option("-k", k)->capture_default_str();
  for (auto* c : {ainterp, avecop, aneigh}) c->add_option("--atlas", atlas_stem)->required();
  for (auto* c : {ainterp, avecop}) {
    c->add_option("--checkpoint", ckpt)->required();
    c->add_option("--out", out, "Directory for PNGs");
  }

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Sample images from a checkpoint");
  gen_cmd->add_option("--checkpoint", ckpt)->required();
  gen_cmd->add_option("--n", n)->capture_default_str();
  gen_cmd->add_option("--seed", seed)->capture_default_str();
  gen_cmd->add_option("--out", out)->required();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the inference and reader-study service");
  serve_cmd->add_option("--config", config_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      data::IngestOptions o{patch, overlap, coverage, !no_augment, test_fraction, seed};
      const auto ds = data::build_dataset(data::read_source_dir(src), o);
      data::save_dataset(out, ds);
      print({{"patches", ds.size()}, {"config_digest", ds.config_digest()}});
    } else if (synth->parsed()) {
      data::SynthOptions o;
      o.n = n;
      o.image_size = size;
      o.seed = seed;
      o.palette_shift = palette_shift;
      const auto ds = data::synth_toy_dataset(o, test_fraction);
      data::save_dataset(out, ds);
      print({{"patches", ds.size()}, {"config_digest", ds.config_digest()}});
    } else if (bins->parsed()) {
      auto ds = data::load_dataset(data_dir);
      std::map<std::string, int> counts;
      if (!counts_csv.empty()) {
        std::ifstream in(counts_csv);
        if (!in) throw NotFoundError("cannot open " + counts_csv);
        std::string line;
        while (std::getline(in, line)) {
          const auto f = features::detail::split_csv_line(line);
          if (f.size() < 2) continue;
          try {
            counts[f[0]] = std::stoi(f[1]);
          } catch (const std::exception&) {
          }
        }
      }
      data::assign_count_classes(ds, classes, counts);
      data::save_dataset(data_dir, ds);
      print({{"bin_edges", ds.bin_edges}, {"effective_classes", ds.bin_edges.size() + 1}});
    } else if (train_cmd->parsed()) {
      auto cfg = train::load_train_config(config_path);
      if (subsample >= 0) cfg.subsample = subsample;
      const auto ds = data::load_dataset(data_dir);
      auto imgs = ds.images("train");
      if (imgs.empty()) imgs = ds.images();
      train::Trainer tr(model::Gan::create(cfg.model, cfg.seed), cfg);
      tr.set_output_dir(out);
      if (cfg.fid_every > 0) {
        auto held = ds.images("test");
        if (held.size() < 2) held = imgs;
        auto tp = std::make_shared<features::TestProjection>();
        auto real = std::make_shared<features::FeatureMatrix>(tp->extract(held));
        tr.set_fid_hook([tp, real, samples = cfg.fid_samples, s = cfg.seed](model::Gan& g) {
          std::vector<Image> gen;
          for (int i = 0; i < samples; i += 100) {
            const auto b = std::min(100, samples - i);
            for (auto& im : from_batch(model::generate_from_seed(g, b, s + 1000003ULL + static_cast<std::uint64_t>(i))))
              gen.push_back(std::move(im));
          }
          return metrics::fid_report(*real, tp->extract(gen), 0, 0).value;
        });
      }
      metrics::write_text((fs::path(out) / "train_config.json").string(), json(cfg).dump(2) + "\n");
      tr.train(imgs, [](const train::EpochSummary& s) {
        json j = {{"epoch", s.epoch}, {"generator_steps", s.generator_steps}, {"critic_steps", s.critic_steps}};
        if (s.fid) j["fid"] = *s.fid;
        if (!s.checkpoint.empty()) j["checkpoint"] = s.checkpoint;
        std::cout << j.dump() << std::endl;
      });
    } else if (extract->parsed()) {
      const auto ex = features::make_extractor(extractor_config(space, input_size, dim, space_seed, csv));
      const auto set = load_images(images_dir, split);
      auto f = ex->extract(set.images, set.ids);
      f.tags = set.labels;
      features::save_features(out, f);
      print({{"rows", f.rows}, {"space", f.space}, {"digest", f.payload_digest()}});
    } else if (std::any_of(pair_cmds.begin(), pair_cmds.end(), [](auto* c) { return c->parsed(); })) {
      const auto a = features::load_features(real_f);
      const auto b = features::load_features(gen_f);
      metrics::MetricReport r;
      if (pair_cmds[0]->parsed()) r = metrics::fid_report(a, b, fid_n, seed);
      else if (pair_cmds[1]->parsed()) r = metrics::kid_report(a, b, block, seed);
      else r = metrics::one_nn_report(a, b, seed);
      write_json(report_out, metrics::to_json(r));
      print(metrics::to_json(r));
    } else if (contam->parsed() || consist->parsed()) {
      const json sj = data::read_json_file(spec_path);
      const auto spec = metrics::contamination_spec_from_json(sj.value("experiment", json::object()));
      const auto ex = features::make_extractor(sj.value("feature_space", json{{"extractor", "test-projection"}}));
      const auto base = fs::path(spec_path).parent_path();
      const auto ref = corpus_from_spec(sj.at("reference"), base, *ex);
      const auto con = corpus_from_spec(sj.at("contaminant"), base, *ex);
      if (contam->parsed()) emit_reports(metrics::contamination_experiment(spec, ref, con), report_out, "contamination");
      else emit_reports(metrics::consistency_experiment(spec, ref, con), report_out, "consistency");
    } else if (roc_cmd->parsed()) {
      std::ifstream in(ratings);
      if (!in) throw NotFoundError("cannot open " + ratings);
      std::vector<double> scores;
      std::vector<bool> truth;
      std::string line;
      while (std::getline(in, line)) {
        const auto f = features::detail::split_csv_line(line);
        double v;
        if (f.size() < 2 || !features::detail::parse_double(f[0], v)) continue;
        if (f[1] != "real" && f[1] != "generated" && f[1] != "1" && f[1] != "0")
          throw ArgumentError("truth must be real|generated|1|0, got '" + f[1] + "'");
        scores.push_back(v);
        truth.push_back(f[1] == "real" || f[1] == "1");
      }
      const auto r = metrics::roc_auc(scores, truth);
      json curve = json::array();
      for (const auto& p : r.curve) curve.push_back({{"threshold", p.threshold}, {"fpr", p.fpr}, {"tpr", p.tpr}});
      if (!report_out.empty()) metrics::write_text(report_out, metrics::svg_roc(r));
      print({{"auc", r.auc}, {"positives", r.positives}, {"negatives", r.negatives}, {"curve", curve}});
    } else if (abuild->parsed()) {
      auto ck = model::load_checkpoint(ckpt);
      const auto ex = features::make_extractor();
      const auto set = load_images(data_dir);
      auto real = ex->extract(set.images, set.ids);
      auto atlas = latent::LatentAtlas::build(ck.gan, ck.digest, m_points, seed, *ex, real, set.labels,
                                              static_cast<std::size_t>(k));
      atlas.save(atlas_stem);
      print({{"points", atlas.points().size()}, {"projector", atlas.projector_id()}, {"checkpoint_digest", ck.digest}});
    } else if (ainterp->parsed() || avecop->parsed()) {
      auto ck = model::load_checkpoint(ckpt);
      auto atlas = latent::LatentAtlas::load(atlas_stem);
      if (atlas.checkpoint_digest() != ck.digest) throw IntegrityError("atlas belongs to checkpoint " + atlas.checkpoint_digest());
      if (ainterp->parsed()) {
        const auto path = latent::interpolate(atlas.w(from_id), atlas.w(to_id), steps);
        json arr = json::array();
        std::vector<Image> ims;
        std::vector<std::string> names;
        for (std::size_t i = 0; i < path.size(); ++i) {
          ims.push_back(from_batch(model::synthesize(ck.gan, w_tensor(path[i])), 0));
          names.push_back("step-" + std::to_string(i));
          arr.push_back({{"t", steps > 1 ? static_cast<double>(i) / (steps - 1) : 0.0}, {"w", to_vec(path[i])}});
        }
        if (!out.empty()) save_image_dir(out, ims, names);
        print(arr);
      } else {
        const auto w = atlas.evaluate(latent::parse_expression(expression));
        const Image im = from_batch(model::synthesize(ck.gan, w_tensor(w)), 0);
        json j = {{"expression", expression}, {"w", to_vec(w)}};
        if (save_atlas) {
          if (data_dir.empty()) throw ArgumentError("atlas vecop --save needs --data");
          const auto ex = features::make_extractor();
          const auto set = load_images(data_dir);
          const auto real = ex->extract(set.images, set.ids);
          const auto& p = atlas.register_point(w, ex->extract(std::span<const Image>(&im, 1)), real, set.labels, expression);
          atlas.save(atlas_stem);
          j["point"] = {{"id", p.id}, {"label", p.label}, {"x", p.x}, {"y", p.y}};
        }
        if (!out.empty()) save_image_dir(out, {im}, {"vecop"});
        print(j);
      }
    } else if (aneigh->parsed()) {
      auto atlas = latent::LatentAtlas::load(atlas_stem);
      const auto ex = features::make_extractor();
      const auto set = load_images(data_dir);
      const auto real = ex->extract(set.images, set.ids);
      Eigen::VectorXd q;
      if (fs::exists(image_arg)) {
        const Image im = read_png(image_arg);
        q = ex->extract(std::span<const Image>(&im, 1)).matrix().row(0).transpose();
      } else {
        const auto& fm = atlas.features();
        const auto it = std::find(fm.ids.begin(), fm.ids.end(), image_arg);
        if (it == fm.ids.end()) throw NotFoundError("'" + image_arg + "' is neither a file nor an atlas id");
        q = fm.matrix().row(it - fm.ids.begin()).transpose();
      }
      json arr = json::array();
      const auto nb = latent::nearest(q, real.matrix(), static_cast<std::size_t>(k));
      for (std::size_t r = 0; r < nb.size(); ++r)
        arr.push_back({{"rank", r + 1}, {"id", set.ids[nb[r].index]}, {"distance", nb[r].distance}, {"label", set.labels[nb[r].index]}});
      print(arr);
    } else if (gen_cmd->parsed()) {
      auto ck = model::load_checkpoint(ckpt);
      std::vector<Image> ims;
      std::vector<std::string> names;
      for (std::int64_t i = 0; i < n; ++i) {
        ims.push_back(from_batch(model::generate_from_seed(ck.gan, 1, seed + static_cast<std::uint64_t>(i)), 0));
        names.push_back("seed-" + std::to_string(seed + static_cast<std::uint64_t>(i)));
      }
      save_image_dir(out, ims, names);
      print({{"images", n}, {"checkpoint_digest", ck.digest}});
    } else if (serve_cmd->parsed()) {
      const auto cfg = service::service_config_from_json(data::read_json_file(config_path));
      auto svc = service::Service::open(cfg);
      httplib::Server server;
      svc.mount(server);
      g_stop = [&server] { server.stop(); };
      std::signal(SIGINT, [](int) { if (g_stop) g_stop(); });
      std::signal(SIGTERM, [](int) { if (g_stop) g_stop(); });
      std::cerr << "serving checkpoint " << svc.checkpoint_digest() << " on " << cfg.host << ":" << cfg.port << std::endl;
      if (!server.listen(cfg.host, cfg.port)) throw ConfigError("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
