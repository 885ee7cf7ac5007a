#pragma once

#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "pathgan/core/image.hpp"
#include "pathgan/model/checkpoint.hpp"
#include "pathgan/train/config.hpp"

namespace pathgan::train {

struct TrainLogRecord {
  std::int64_t step = 0;
  double l_dis = 0.0;
  double l_gen = 0.0;
  double ortho = 0.0;
  double seconds = 0.0;
  /// Digest of the trainer RNG state after the step.
  std::string rng_digest;

  /// Everything except wall time; equal across identical seeded runs.
  bool same_trajectory(const TrainLogRecord& o) const {
    return step == o.step && l_dis == o.l_dis && l_gen == o.l_gen && ortho == o.ortho && rng_digest == o.rng_digest;
  }
};

inline std::string csv_header() { return "step,L_Dis,L_Gen,ortho,seconds"; }

inline std::string to_csv(const TrainLogRecord& r) {
  std::ostringstream os;
  os << r.step << ',' << std::setprecision(10) << r.l_dis << ',' << r.l_gen << ',' << r.ortho << ','
     << std::setprecision(6) << r.seconds;
  return os.str();
}

struct EpochSummary {
  int epoch = 0;
  std::int64_t generator_steps = 0;
  std::int64_t critic_steps = 0;
  std::optional<double> fid;
  std::string checkpoint;
};

/// Alternating critic/generator optimisation on one model.
class Trainer {
public:
  Trainer(model::Gan gan, TrainConfig cfg)
      : gan_(std::move(gan)), cfg_(std::move(cfg)), rng_(cfg_.seed), critic_opt_(cfg_.adam()), gen_opt_(cfg_.adam()) {
    cfg_.validate();
    if (gan_.config.image_size != cfg_.model.image_size) throw ConfigError("trainer: model/config image size differ");
  }

  /// `critic_steps_per_gen` critic updates, one per real batch, followed by
  /// one joint generator+mapper update against the last real batch.
  TrainLogRecord train_step(std::span<const Tensor> real_batches) {
    if (static_cast<int>(real_batches.size()) != cfg_.critic_steps_per_gen)
      throw ArgumentError("train_step: expected " + std::to_string(cfg_.critic_steps_per_gen) + " real batches");
    const auto t0 = std::chrono::steady_clock::now();
    double l_dis = 0.0;
    for (const auto& real : real_batches) l_dis += critic_update(real);
    l_dis /= static_cast<double>(real_batches.size());
    const double l_gen = generator_update(real_batches.back());

    TrainLogRecord rec;
    rec.step = gen_opt_.steps();
    rec.l_dis = l_dis;
    rec.l_gen = l_gen;
    rec.ortho = last_ortho_;
    elapsed_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.seconds = elapsed_;
    std::ostringstream st;
    st << rng_;
    rec.rng_digest = digest_hex(st.str());
    log_.push_back(rec);
    return rec;
  }

  /// Epoch loop over a shuffled dataset: ceil(n/b) real batches per epoch,
  /// each feeding one critic update; a generator update follows every
  /// `critic_steps_per_gen` critic updates (carried across epochs).
  std::vector<EpochSummary> train(const std::vector<Image>& images,
                                  const std::function<void(const EpochSummary&)>& on_epoch = {}) {
    if (images.empty()) throw ArgumentError("train: empty dataset");
    for (const auto& im : images)
      if (im.height != cfg_.model.image_size || im.width != cfg_.model.image_size)
        throw ConfigError("train: image size does not match model");
    std::vector<std::size_t> pool(images.size());
    std::iota(pool.begin(), pool.end(), 0);
    if (cfg_.subsample > 0 && static_cast<std::size_t>(cfg_.subsample) < pool.size()) {
      Rng sub(cfg_.seed ^ 0x5b5a3c1dULL);
      std::shuffle(pool.begin(), pool.end(), sub);
      pool.resize(static_cast<std::size_t>(cfg_.subsample));
      std::sort(pool.begin(), pool.end());
    }
    std::vector<EpochSummary> out;
    std::vector<Tensor> pending;
    const auto b = static_cast<std::size_t>(cfg_.batch_size);
    for (int e = 1; e <= cfg_.epochs; ++e) {
      std::shuffle(pool.begin(), pool.end(), rng_);
      for (std::size_t s = 0; s < pool.size(); s += b) {
        std::vector<Image> batch;
        for (std::size_t i = s; i < std::min(pool.size(), s + b); ++i) batch.push_back(images[pool[i]]);
        pending.push_back(to_batch(batch));
        if (static_cast<int>(pending.size()) == cfg_.critic_steps_per_gen) {
          train_step(pending);
          if (log_sink_) log_sink_(log_.back());
          pending.clear();
        }
      }
      EpochSummary sum;
      sum.epoch = e;
      sum.generator_steps = gen_opt_.steps();
      sum.critic_steps = critic_opt_.steps();
      if (fid_hook_ && cfg_.fid_every > 0 && e % cfg_.fid_every == 0) {
        model::Gan snapshot = gan_.clone();
        sum.fid = fid_hook_(snapshot);
        if (!best_fid_ || *sum.fid < *best_fid_) {
          best_fid_ = sum.fid;
          if (!out_dir_.empty()) model::save_checkpoint((out_dir_ / "best.ckpt").string(), gan_, checkpoint_info(e));
        }
      }
      if (!out_dir_.empty() && cfg_.checkpoint_every > 0 && (e % cfg_.checkpoint_every == 0 || e == cfg_.epochs))
        sum.checkpoint = write_epoch_checkpoint(e);
      out.push_back(sum);
      if (on_epoch) on_epoch(sum);
    }
    return out;
  }

  /// Checkpoints (epoch-NNNN.ckpt, best.ckpt) and loss.csv go here.
  void set_output_dir(const std::filesystem::path& dir) {
    out_dir_ = dir;
    std::filesystem::create_directories(dir);
    auto csv = std::make_shared<std::ofstream>(dir / "loss.csv", std::ios::app);
    if (std::filesystem::file_size(dir / "loss.csv") == 0) *csv << csv_header() << '\n';
    log_sink_ = [csv](const TrainLogRecord& r) { *csv << to_csv(r) << '\n' << std::flush; };
  }

  /// Called on a parameter snapshot, never on the live model.
  void set_fid_hook(std::function<double(model::Gan&)> hook) { fid_hook_ = std::move(hook); }

  model::Gan& gan() { return gan_; }
  const TrainConfig& config() const { return cfg_; }
  const Adam& critic_optimizer() const { return critic_opt_; }
  const Adam& generator_optimizer() const { return gen_opt_; }
  const std::vector<TrainLogRecord>& log() const { return log_; }
  std::optional<double> best_fid() const { return best_fid_; }

private:
  model::CheckpointInfo checkpoint_info(int epoch) const {
    model::CheckpointInfo info;
    info.step = gen_opt_.steps();
    info.seeds = {{"train_seed", cfg_.seed}};
    info.extra = {{"epoch", epoch}, {"critic_steps", critic_opt_.steps()}, {"train_config", cfg_}};
    return info;
  }

  std::string write_epoch_checkpoint(int epoch) {
    std::ostringstream name;
    name << "epoch-" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
    const auto path = out_dir_ / name.str();
    model::save_checkpoint(path.string(), gan_, checkpoint_info(epoch));
    written_.push_back(path);
    while (cfg_.checkpoint_keep > 0 && written_.size() > static_cast<std::size_t>(cfg_.checkpoint_keep)) {
      std::filesystem::remove(written_.front());
      written_.pop_front();
    }
    return path.string();
  }

  nn::Var fake_images(std::int64_t n, bool grad) {
    const int dim = gan_.config.latent_dim;
    std::normal_distribution<float> normal;
    auto draw = [&] {
      Tensor z({n, dim});
      for (auto& v : z.values()) v = normal(rng_);
      return nn::constant(std::move(z));
    };
    std::uniform_real_distribution<double> unit;
    const bool mix = unit(rng_) < cfg_.style_mix_probability;
    auto z1 = draw();
    nn::Var z2 = mix ? draw() : nullptr;
    const int crossover = mix ? std::uniform_int_distribution<int>(1, gan_.config.style_layers())(rng_) : 0;
    std::optional<nn::NoGradGuard> guard;
    if (!grad) guard.emplace();
    model::ForwardOptions opt;
    opt.training = true;
    auto w1 = gan_.mapper.forward(z1, opt);
    auto w2 = mix ? gan_.mapper.forward(z2, opt) : nullptr;
    return gan_.generator.forward(w1, w2, crossover, opt);
  }

  double ortho_grads(model::ParamStore& ps) {
    double total = 0.0;
    for (auto& [name, p] : ps.entries()) {
      if (!p.orthogonal_reg || p.var->value.rank() < 2) continue;
      total += add_orthogonal_penalty_grad(p.var->value, p.var->grad_buffer(), cfg_.ortho_weight);
    }
    return total;
  }

  static void check_finite(double v, const char* what, std::int64_t step) {
    if (!std::isfinite(v))
      throw NumericalError(std::string("non-finite ") + what + " at generator step " + std::to_string(step));
  }

  std::pair<nn::Var, nn::Var> critic_pair(const Tensor& real, const nn::Var& fake) {
    model::ForwardOptions opt;
    opt.training = true;
    const auto n = real.dim(0);
    auto scores = gan_.critic.forward(nn::concat_batch(nn::constant(real), fake), opt);
    return {nn::slice_batch(scores, 0, n), nn::slice_batch(scores, n, n + fake->value.dim(0))};
  }

  double critic_update(const Tensor& real) {
    gan_.critic.params().set_requires_grad(true);
    auto fake = nn::constant(fake_images(real.dim(0), false)->value);
    auto [c_real, c_fake] = critic_pair(real, fake);
    auto loss = adversarial_loss(c_real, c_fake, cfg_.loss_kind, LossRole::Discriminator);
    const double value = loss->value[0];
    check_finite(value, "L_Dis", gen_opt_.steps());
    gan_.critic.params().zero_grad();
    nn::backward(loss);
    critic_ortho_ = ortho_grads(gan_.critic.params());
    critic_opt_.step({&gan_.critic.params()});
    return value;
  }

  double generator_update(const Tensor& real) {
    gan_.critic.params().set_requires_grad(false);
    gan_.mapper.params().zero_grad();
    gan_.generator.params().zero_grad();
    auto fake = fake_images(real.dim(0), true);
    auto [c_real, c_fake] = critic_pair(real, fake);
    auto loss = adversarial_loss(c_real, c_fake, cfg_.loss_kind, LossRole::Generator);
    const double value = loss->value[0];
    check_finite(value, "L_Gen", gen_opt_.steps());
    nn::backward(loss);
    gan_.critic.params().set_requires_grad(true);
    gan_.critic.params().zero_grad();
    const double g_ortho = ortho_grads(gan_.generator.params()) + ortho_grads(gan_.mapper.params());
    last_ortho_ = critic_ortho_ + g_ortho;
    gen_opt_.step({&gan_.mapper.params(), &gan_.generator.params()});
    return value;
  }

  model::Gan gan_;
  TrainConfig cfg_;
  Rng rng_;
  Adam critic_opt_;
  Adam gen_opt_;
  std::vector<TrainLogRecord> log_;
  double critic_ortho_ = 0.0;
  double last_ortho_ = 0.0;
  double elapsed_ = 0.0;
  std::filesystem::path out_dir_;
  std::function<void(const TrainLogRecord&)> log_sink_;
  std::function<double(model::Gan&)> fid_hook_;
  std::optional<double> best_fid_;
  std::deque<std::filesystem::path> written_;
};

} // namespace pathgan::train
