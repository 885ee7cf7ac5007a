// Serves a toy model over HTTP on a free local port and drives one reader
// study session through the JSON API with a scripted rater.

#include <cstdio>
#include <thread>

#include <CLI11.hpp>

#include "pathgan/pathgan.hpp"

using namespace pathgan;
using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"Reader study demo"};
  std::string dir = "demo-study";
  app.add_option("--out", dir, "Working directory");
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(dir);

  auto gan = model::Gan::create(model::ModelConfig::toy(32), 2);
  model::save_checkpoint(dir + "/model.ckpt", gan, {});
  data::SynthOptions so;
  so.n = 60;
  so.image_size = 32;
  so.seed = 4;
  service::RealCorpus real;
  for (const auto& p : data::synth_toy_patches(so)) {
    real.ids.push_back(p.id);
    real.images.push_back(p.image);
    real.labels.push_back(data::to_string(*p.tissue));
  }
  features::TestProjection space;
  const auto real_f = space.extract(real.images, real.ids);
  latent::LatentAtlas::build(gan, model::weights_digest(gan), 60, 9, space, real_f, real.labels, 10).save(dir + "/atlas");

  service::ServiceOptions opt;
  opt.study_dir = dir + "/studies";
  auto svc = service::Service::open(dir + "/model.ckpt", dir + "/atlas", std::make_shared<features::TestProjection>(), real, opt);
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  std::printf("service on http://127.0.0.1:%d\n", port);

  httplib::Client cli("127.0.0.1", port);
  const auto session = json::parse(cli.Post("/study", R"({"seed": 1})", "application/json")->body);
  const std::string id = session["session_id"];
  // A chance-level rater: scores come from a hash of the image bytes, so the
  // AUC should land near 0.5.
  for (const auto& item : session["items"]) {
    const std::string iid = item["item_id"];
    const auto img = json::parse(cli.Get("/study/" + id + "/items/" + iid + "/image")->body);
    const auto png = img["image"]["data"].get<std::string>();
    const int rating = 1 + static_cast<int>(std::hash<std::string>{}(png) % 5);
    cli.Post("/study/" + id + "/rate", json{{"item_id", iid}, {"rating", rating}}.dump(), "application/json");
  }
  const auto result = json::parse(cli.Get("/study/" + id + "/result")->body);
  std::printf("session %s: AUC %.3f over %d real / %d generated\n", id.c_str(), result["roc"]["auc"].get<double>(),
              result["roc"]["positives"].get<int>(), result["roc"]["negatives"].get<int>());
  metrics::write_text(dir + "/roc.svg", result["svg"]);
  server.stop();
  th.join();
  std::printf("event log in %s/studies, ROC plot in %s/roc.svg\n", dir.c_str(), dir.c_str());
}
