#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <vector>

#include "amisr/arch_config.hpp"
#include "amisr/dataset.hpp"
#include "amisr/losses.hpp"
#include "amisr/params.hpp"

namespace amisr {

struct TrainConfig {
  int steps = 500;
  int batch = 1;
  // Plain training lr; adversarial training uses lr_g / lr_d.
  double lr = 2e-4;
  double lr_g = 1e-4;
  double lr_d = 4e-4;
  LossWeights loss_weights;
  // Checkpoint after every step s with s % checkpoint_every == 0; 0 disables
  // intermediate checkpoints. final.amck is always written when a checkpoint
  // directory is given.
  int checkpoint_every = 0;
  uint64_t seed = 0;
  bool deterministic = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& t);
// Unknown keys are a ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainLogRow {
  int64_t step = 0;
  // Plain: pixel loss. Adversarial: the weighted generator objective.
  double loss = 0.0;
  double psnr_train = 0.0;
  // Adversarial runs only.
  std::optional<double> loss_d, loss_pix, loss_pcp, loss_adv, d_accuracy;

  nlohmann::json to_json() const;
};

struct TrainOutputs {
  // Empty: no checkpoints are written.
  std::filesystem::path checkpoint_dir;
  // One JSON object per line and step.
  std::ostream* log = nullptr;
  // Progress lines on stderr every this many steps; 0 silences them.
  int progress_every = 0;
};

template <typename T>
struct TrainResult {
  ParamStore<T> params;
  std::optional<ParamStore<T>> discriminator;
  std::vector<TrainLogRow> log;
  int checkpoints_written = 0;
};

// Parameters come from build(arch, Rng(cfg.seed)); batches from a
// BatchStream over `samples` with `shuffle_seed`. Each step: forward, pixel
// loss, backward, Adam. A non-finite value raises DivergenceError.
template <typename T>
TrainResult<T> train(const ArchConfig& arch, const std::vector<Sample>& samples, const TrainConfig& cfg,
                     uint64_t shuffle_seed, const TrainOutputs& out = {});

// Alternates one discriminator step and one generator step per iteration.
// The discriminator step sees the generator output as a constant; the
// generator step binds the discriminator as frozen constants. Generator
// initialization and batch order match train().
template <typename T>
TrainResult<T> train_gan(const ArchConfig& arch, const std::vector<Sample>& samples, const TrainConfig& cfg,
                         uint64_t shuffle_seed, const PerceptualProxy<T>& proxy, const TrainOutputs& out = {});

// Batch PSNR of clamped outputs against targets.
template <typename T>
double batch_psnr(const Tensor<T>& sr, const Tensor<T>& hr);

// Name of the checkpoint written after 0-based step s.
std::string checkpoint_name(int64_t step);

}  // namespace amisr
