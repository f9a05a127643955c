#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "amisr/blocks.hpp"
#include "amisr/tensor.hpp"

namespace amisr {

// Architecture hyperparameters plus ablation switches.
struct ArchConfig {
  int base_channels = 32;
  int heads = 4;
  // H = W of the network input (the pre-upsampled LR image).
  int input_size = 128;
  int scale = 8;
  int au_reduction = 4;

  bool no_sa = false;
  bool no_rdfe = false;
  bool no_skaf = false;
  bool ffn_instead_of_rdfe = false;
  // 0 keeps all three depthwise paths; 3, 5 or 7 keeps only that one.
  int rdfe_single_path = 0;
  blocks::SkafPool skaf_pool = blocks::SkafPool::both;
  bool no_edff = false;

  DType dtype = DType::f32;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;
  blocks::LgfiOptions lgfi_options() const;

  bool operator==(const ArchConfig&) const = default;
};

nlohmann::json to_json(const ArchConfig& cfg);
// Missing keys keep their defaults; unknown keys are a ConfigError.
ArchConfig arch_from_json(const nlohmann::json& j);

// Names accepted by make_variant, in a stable order.
const std::vector<std::string>& variant_names();
// Applies one ablation flag to `base`. "full" returns the base with every
// ablation cleared.
ArchConfig make_variant(const ArchConfig& base, const std::string& flag);

}  // namespace amisr
