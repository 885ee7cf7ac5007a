#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "pathgan/model/config.hpp"
#include "pathgan/train/adam.hpp"
#include "pathgan/train/losses.hpp"

namespace pathgan::train {

struct TrainConfig {
  double learning_rate = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int critic_steps_per_gen = 5;
  int batch_size = 16;
  int epochs = 30;
  LossKind loss_kind = LossKind::RelativisticAverage;
  double style_mix_probability = 0.5;
  double ortho_weight = 1e-4;
  std::uint64_t seed = 0;
  /// Train on a seeded subset of this many images (0 = all).
  std::int64_t subsample = 0;
  int checkpoint_every = 1;
  /// Number of epoch checkpoints kept on disk (0 = all).
  int checkpoint_keep = 0;
  /// FID hook cadence in epochs (0 = off) and sample count per evaluation.
  int fid_every = 0;
  int fid_samples = 500;
  model::ModelConfig model = model::ModelConfig::toy(64);

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }

  void validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw ConfigError("adam betas must be in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
    if (critic_steps_per_gen < 1) throw ConfigError("critic_steps_per_gen must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(style_mix_probability >= 0.0 && style_mix_probability <= 1.0))
      throw ConfigError("style_mix_probability must be in [0, 1]");
    if (!(ortho_weight >= 0.0)) throw ConfigError("ortho_weight must be >= 0");
    if (subsample < 0) throw ConfigError("subsample must be >= 0");
    if (checkpoint_every < 0 || checkpoint_keep < 0 || fid_every < 0) throw ConfigError("cadences must be >= 0");
    if (fid_samples < 2) throw ConfigError("fid_samples must be >= 2");
    model.validate();
  }
};

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"adam_eps", c.adam_eps},
       {"critic_steps_per_gen", c.critic_steps_per_gen},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"loss_kind", to_string(c.loss_kind)},
       {"style_mix_probability", c.style_mix_probability},
       {"ortho_weight", c.ortho_weight},
       {"seed", c.seed},
       {"subsample", c.subsample},
       {"checkpoint_every", c.checkpoint_every},
       {"checkpoint_keep", c.checkpoint_keep},
       {"fid_every", c.fid_every},
       {"fid_samples", c.fid_samples},
       {"model", c.model}};
}

/// Missing keys keep their defaults; unknown keys are an error. "model" may
/// be an object or one of the presets "toy64", "toy32", "reference224".
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> keys = {
      "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",        "critic_steps_per_gen", "batch_size",
      "epochs",        "loss_kind",  "style_mix_probability", "ortho_weight", "seed",       "subsample",
      "checkpoint_every", "checkpoint_keep", "fid_every", "fid_samples", "model"};
  reject_unknown_keys(j, keys, "train config");
  try {
    TrainConfig d;
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
    c.adam_eps = j.value("adam_eps", d.adam_eps);
    c.critic_steps_per_gen = j.value("critic_steps_per_gen", d.critic_steps_per_gen);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.epochs = j.value("epochs", d.epochs);
    c.loss_kind = loss_kind_from_string(j.value("loss_kind", to_string(d.loss_kind)));
    c.style_mix_probability = j.value("style_mix_probability", d.style_mix_probability);
    c.ortho_weight = j.value("ortho_weight", d.ortho_weight);
    c.seed = j.value("seed", d.seed);
    c.subsample = j.value("subsample", d.subsample);
    c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
    c.checkpoint_keep = j.value("checkpoint_keep", d.checkpoint_keep);
    c.fid_every = j.value("fid_every", d.fid_every);
    c.fid_samples = j.value("fid_samples", d.fid_samples);
    c.model = d.model;
    if (j.contains("model")) {
      const auto& m = j["model"];
      if (m.is_string()) {
        const auto name = m.get<std::string>();
        if (name == "reference224") c.model = model::ModelConfig::reference224();
        else if (name == "toy64") c.model = model::ModelConfig::toy(64);
        else if (name == "toy32") c.model = model::ModelConfig::toy(32);
        else throw ConfigError("unknown model preset '" + name + "'");
      } else {
        nlohmann::json proto;
        model::to_json(proto, model::ModelConfig{});
        std::set<std::string> mkeys;
        for (const auto& [k, _] : proto.items()) mkeys.insert(k);
        reject_unknown_keys(m, mkeys, "model config");
        c.model = m.get<model::ModelConfig>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto c = j.get<TrainConfig>();
  c.validate();
  return c;
}

} // namespace pathgan::train
