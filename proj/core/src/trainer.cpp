#include "amisr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>

#include "amisr/checkpoint.hpp"
#include "amisr/discriminator.hpp"
#include "amisr/errors.hpp"
#include "amisr/network.hpp"
#include "amisr/optim.hpp"
#include "amisr/parallel.hpp"

namespace amisr {

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("train: steps must be non-negative");
  if (batch < 1) throw ConfigError("train: batch must be at least 1");
  if (!(lr > 0) || !(lr_g > 0) || !(lr_d > 0)) throw ConfigError("train: learning rates must be positive");
  if (loss_weights.pix < 0 || loss_weights.pcp < 0 || loss_weights.adv < 0) {
    throw ConfigError("train: loss weights must be non-negative");
  }
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be non-negative");
}

nlohmann::json to_json(const TrainConfig& t) {
  return nlohmann::json{
      {"steps", t.steps},
      {"batch", t.batch},
      {"lr", t.lr},
      {"lr_g", t.lr_g},
      {"lr_d", t.lr_d},
      {"loss_weights", {{"pix", t.loss_weights.pix}, {"pcp", t.loss_weights.pcp}, {"adv", t.loss_weights.adv}}},
      {"checkpoint_every", t.checkpoint_every},
      {"seed", t.seed},
      {"deterministic", t.deterministic},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train: expected a JSON object");
  static const std::set<std::string> known{"steps", "batch",           "lr",   "lr_g",         "lr_d",
                                           "loss_weights", "checkpoint_every", "seed", "deterministic"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("train: unknown key '" + key + "'");
  }
  TrainConfig t;
  try {
    auto get = [&](const nlohmann::json& obj, const char* key, auto& field) {
      if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    get(j, "steps", t.steps);
    get(j, "batch", t.batch);
    get(j, "lr", t.lr);
    get(j, "lr_g", t.lr_g);
    get(j, "lr_d", t.lr_d);
    get(j, "checkpoint_every", t.checkpoint_every);
    get(j, "seed", t.seed);
    get(j, "deterministic", t.deterministic);
    if (j.contains("loss_weights")) {
      const auto& w = j.at("loss_weights");
      if (!w.is_object()) throw ConfigError("train: loss_weights must be an object");
      for (const auto& [key, _] : w.items()) {
        if (key != "pix" && key != "pcp" && key != "adv") {
          throw ConfigError("train: unknown key 'loss_weights." + key + "'");
        }
      }
      get(w, "pix", t.loss_weights.pix);
      get(w, "pcp", t.loss_weights.pcp);
      get(w, "adv", t.loss_weights.adv);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  t.validate();
  return t;
}

nlohmann::json TrainLogRow::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j{{"step", step}, {"loss", num(loss)}, {"psnr_train", num(psnr_train)}};
  if (loss_d) j["loss_d"] = num(*loss_d);
  if (loss_pix) j["loss_pix"] = num(*loss_pix);
  if (loss_pcp) j["loss_pcp"] = num(*loss_pcp);
  if (loss_adv) j["loss_adv"] = num(*loss_adv);
  if (d_accuracy) j["d_accuracy"] = *d_accuracy;
  return j;
}

std::string checkpoint_name(int64_t step) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "step_%06lld.amck", static_cast<long long>(step));
  return buf;
}

template <typename T>
double batch_psnr(const Tensor<T>& sr, const Tensor<T>& hr) {
  if (sr.shape() != hr.shape()) throw ShapeError("batch_psnr: shape mismatch");
  double sse = 0.0;
  auto a = sr.data();
  auto b = hr.data();
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = std::clamp(static_cast<double>(a[i]), 0.0, 1.0) - std::clamp(static_cast<double>(b[i]), 0.0, 1.0);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  return mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
}

namespace {

// Shared bookkeeping of both loops.
template <typename T>
struct Session {
  const ArchConfig arch;
  const TrainConfig& cfg;
  const TrainOutputs& out;
  TrainResult<T> result;

  Session(const ArchConfig& a, const TrainConfig& c, const TrainOutputs& o) : arch(typed(a)), cfg(c), out(o) {
    cfg.validate();
    arch.validate();
    if (c.deterministic) set_deterministic(true);
  }

  static ArchConfig typed(ArchConfig a) {
    a.dtype = dtype_of<T>();
    return a;
  }

  void record(const TrainLogRow& row) {
    result.log.push_back(row);
    if (out.log) *out.log << row.to_json().dump() << "\n" << std::flush;
    if (out.progress_every > 0 && (row.step % out.progress_every == 0 || row.step + 1 == cfg.steps)) {
      std::cerr << "step " << row.step + 1 << "/" << cfg.steps << "  loss " << row.loss << "  psnr "
                << row.psnr_train << "\n";
    }
  }

  void maybe_checkpoint(int64_t step) {
    if (out.checkpoint_dir.empty() || cfg.checkpoint_every == 0 || step % cfg.checkpoint_every != 0) return;
    save_checkpoint(out.checkpoint_dir / checkpoint_name(step), result.params, arch);
    ++result.checkpoints_written;
  }

  void finish() {
    if (out.checkpoint_dir.empty()) return;
    save_checkpoint(out.checkpoint_dir / "final.amck", result.params, arch);
    ++result.checkpoints_written;
    if (result.discriminator) {
      write_file_bytes(out.checkpoint_dir / "discriminator.amck",
                       encode_store(*result.discriminator, nlohmann::json{{"discriminator", true}}));
    }
  }

  [[noreturn]] void diverged(int64_t step, double lr, double grad_norm, const std::string& what) const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "non-finite loss at step %lld (lr=%g, last grad norm=%g): ",
                  static_cast<long long>(step), lr, grad_norm);
    throw DivergenceError(buf + what);
  }
};

}  // namespace

template <typename T>
TrainResult<T> train(const ArchConfig& arch_in, const std::vector<Sample>& samples, const TrainConfig& cfg,
                     uint64_t shuffle_seed, const TrainOutputs& out) {
  Session<T> s(arch_in, cfg, out);
  Rng init(cfg.seed);
  s.result.params = build<T>(s.arch, init);
  ParamStore<T>& params = s.result.params;
  Adam<T> adam(params, {cfg.lr});
  BatchStream stream(samples, cfg.batch, shuffle_seed);
  double grad_norm = 0.0;

  for (int64_t step = 0; step < cfg.steps; ++step) {
    const Batch<T> batch = stream.next<T>();
    TrainLogRow row;
    row.step = step;
    try {
      params.zero_grad();
      Tape<T> tape;
      Binder<T> binder(params, &tape);
      const Var<T> sr = forward(s.arch, binder, Var<T>(batch.lr_up));
      const Var<T> loss = pixel_loss(sr, Var<T>(batch.hr));
      row.loss = static_cast<double>(loss.value().item());
      if (!std::isfinite(row.loss)) throw NumericError("loss is not finite");
      row.psnr_train = batch_psnr(sr.value(), batch.hr);
      tape.backward(loss);
      grad_norm = params.grad_norm();
      if (!std::isfinite(grad_norm)) throw NumericError("gradient norm is not finite");
    } catch (const NumericError& e) {
      s.diverged(step, cfg.lr, grad_norm, e.what());
    }
    adam.step();
    s.record(row);
    s.maybe_checkpoint(step);
  }
  s.finish();
  return std::move(s.result);
}

template <typename T>
TrainResult<T> train_gan(const ArchConfig& arch_in, const std::vector<Sample>& samples, const TrainConfig& cfg,
                         uint64_t shuffle_seed, const PerceptualProxy<T>& proxy, const TrainOutputs& out) {
  Session<T> s(arch_in, cfg, out);
  Rng init(cfg.seed);
  s.result.params = build<T>(s.arch, init);
  Rng disc_init = Rng(cfg.seed).split(0xd15c);
  s.result.discriminator = build_discriminator<T>(disc_init);
  ParamStore<T>& gen = s.result.params;
  ParamStore<T>& disc = *s.result.discriminator;
  Adam<T> adam_g(gen, {cfg.lr_g});
  Adam<T> adam_d(disc, {cfg.lr_d});
  BatchStream stream(samples, cfg.batch, shuffle_seed);
  const LossWeights& w = cfg.loss_weights;
  double grad_norm = 0.0;

  for (int64_t step = 0; step < cfg.steps; ++step) {
    const Batch<T> batch = stream.next<T>();
    const Var<T> hr(batch.hr);
    TrainLogRow row;
    row.step = step;
    try {
      // Discriminator step on a detached generator output.
      const Tensor<T> fake = infer(s.arch, gen, batch.lr_up);
      {
        disc.zero_grad();
        Tape<T> tape;
        Binder<T> binder(disc, &tape);
        const Var<T> real_logits = discriminator_logits(binder, hr);
        const Var<T> fake_logits = discriminator_logits(binder, Var<T>(fake));
        const Var<T> loss_d = discriminator_loss(real_logits, fake_logits);
        row.loss_d = static_cast<double>(loss_d.value().item());
        int correct = 0;
        for (T v : real_logits.value().data()) correct += v > 0;
        for (T v : fake_logits.value().data()) correct += v < 0;
        row.d_accuracy = static_cast<double>(correct) / static_cast<double>(2 * batch.hr.shape().n());
        tape.backward(loss_d);
        if (!std::isfinite(disc.grad_norm())) throw NumericError("discriminator gradient is not finite");
      }
      adam_d.step();

      // Generator step against the frozen discriminator.
      gen.zero_grad();
      Tape<T> tape;
      Binder<T> binder(gen, &tape);
      const Var<T> sr = forward(s.arch, binder, Var<T>(batch.lr_up));
      LossParts<T> parts;
      parts.pix = pixel_loss(sr, hr);
      if (w.pcp != 0.0) parts.pcp = proxy.loss(sr, hr);
      if (w.adv != 0.0) {
        Binder<T> frozen(disc, &tape, false);
        parts.adv = generator_adversarial_loss(discriminator_logits(frozen, sr));
      }
      const Var<T> loss = total_loss(parts, w);
      row.loss = static_cast<double>(loss.value().item());
      row.loss_pix = static_cast<double>(parts.pix.value().item());
      if (parts.pcp.defined()) row.loss_pcp = static_cast<double>(parts.pcp.value().item());
      if (parts.adv.defined()) row.loss_adv = static_cast<double>(parts.adv.value().item());
      if (!std::isfinite(row.loss)) throw NumericError("loss is not finite");
      row.psnr_train = batch_psnr(sr.value(), batch.hr);
      tape.backward(loss);
      grad_norm = gen.grad_norm();
      if (!std::isfinite(grad_norm)) throw NumericError("gradient norm is not finite");
    } catch (const NumericError& e) {
      s.diverged(step, cfg.lr_g, grad_norm, e.what());
    }
    adam_g.step();
    s.record(row);
    s.maybe_checkpoint(step);
  }
  s.finish();
  return std::move(s.result);
}

template TrainResult<float> train(const ArchConfig&, const std::vector<Sample>&, const TrainConfig&, uint64_t,
                                  const TrainOutputs&);
template TrainResult<double> train(const ArchConfig&, const std::vector<Sample>&, const TrainConfig&, uint64_t,
                                   const TrainOutputs&);
template TrainResult<float> train_gan(const ArchConfig&, const std::vector<Sample>&, const TrainConfig&, uint64_t,
                                      const PerceptualProxy<float>&, const TrainOutputs&);
template TrainResult<double> train_gan(const ArchConfig&, const std::vector<Sample>&, const TrainConfig&, uint64_t,
                                       const PerceptualProxy<double>&, const TrainOutputs&);
template double batch_psnr(const Tensor<float>&, const Tensor<float>&);
template double batch_psnr(const Tensor<double>&, const Tensor<double>&);

}  // namespace amisr
