#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "amisr/arch_config.hpp"
#include "amisr/dataset.hpp"
#include "amisr/gradcheck.hpp"
#include "amisr/trainer.hpp"

namespace amisr::cli {

struct Paths {
  std::string out_dir = "runs/default";
  // Checkpoint to read for infer/info style use; empty when unused.
  std::string checkpoint;
  // Optional perceptual extractor weights; empty means the pinned-seed proxy.
  std::string perceptual_weights;
};

struct RunConfig {
  ArchConfig arch;
  TrainConfig train;
  Manifest data;
  Paths paths;
  GradCheckTargetConfig gradcheck;
};

// Every section and key is optional; unknown keys anywhere raise ConfigError.
// train.batch wins over data.batch_size; giving both with different values is
// an error.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace amisr::cli
