#include "amisr_cli/run_config.hpp"

#include <fstream>
#include <set>

#include "amisr/errors.hpp"

namespace amisr::cli {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"arch", "train", "data", "paths", "gradcheck"}, "config");
  RunConfig cfg;
  if (j.contains("arch")) cfg.arch = arch_from_json(j.at("arch"));
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));

  nlohmann::json data = j.contains("data") ? j.at("data") : nlohmann::json{{"synthetic", nlohmann::json::object()}};
  if (!data.is_object()) throw ConfigError("data: expected a JSON object");
  const bool train_batch = j.contains("train") && j.at("train").contains("batch");
  if (data.contains("batch_size") && train_batch && data.at("batch_size") != j.at("train").at("batch")) {
    throw ConfigError("train.batch and data.batch_size disagree");
  }
  if (!data.contains("batch_size")) data["batch_size"] = cfg.train.batch;
  if (!train_batch && j.contains("data") && j.at("data").contains("batch_size")) {
    cfg.train.batch = data.at("batch_size").get<int>();
  }
  if (!data.contains("synthetic") && !data.contains("hr_dir")) data["synthetic"] = nlohmann::json::object();
  // Image size and scale default to the architecture's.
  if (!data.contains("scale")) data["scale"] = cfg.arch.scale;
  if (data.contains("synthetic") && data["synthetic"].is_object() && !data["synthetic"].contains("size")) {
    data["synthetic"]["size"] = cfg.arch.input_size;
  }
  if (data.contains("hr_dir") && !data.contains("size")) data["size"] = cfg.arch.input_size;
  cfg.data = manifest_from_json(data);

  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown(p, {"out_dir", "checkpoint", "perceptual_weights"}, "paths");
    try {
      if (p.contains("out_dir")) cfg.paths.out_dir = p.at("out_dir").get<std::string>();
      if (p.contains("checkpoint")) cfg.paths.checkpoint = p.at("checkpoint").get<std::string>();
      if (p.contains("perceptual_weights")) cfg.paths.perceptual_weights = p.at("perceptual_weights").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("paths: ") + e.what());
    }
  }
  if (j.contains("gradcheck")) {
    const auto& g = j.at("gradcheck");
    reject_unknown(g, {"channels", "size", "samples", "epsilon", "seed"}, "gradcheck");
    try {
      auto& gc = cfg.gradcheck;
      if (g.contains("channels")) gc.channels = g.at("channels").get<int>();
      if (g.contains("size")) gc.size = g.at("size").get<int>();
      if (g.contains("samples")) gc.samples = g.at("samples").get<int>();
      if (g.contains("epsilon")) gc.epsilon = g.at("epsilon").get<double>();
      if (g.contains("seed")) gc.seed = g.at("seed").get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("gradcheck: ") + e.what());
    }
    if (cfg.gradcheck.channels < 1 || cfg.gradcheck.size < 2 || cfg.gradcheck.samples < 1 ||
        !(cfg.gradcheck.epsilon > 0)) {
      throw ConfigError("gradcheck: channels, size, samples and epsilon must be positive");
    }
  }
  const int hr = cfg.data.hr_size();
  if (hr != cfg.arch.input_size) {
    throw ConfigError("data image size " + std::to_string(hr) + " differs from arch.input_size " +
                      std::to_string(cfg.arch.input_size));
  }
  if (cfg.data.scale != cfg.arch.scale) throw ConfigError("data.scale differs from arch.scale");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::json to_json(const RunConfig& cfg) {
  return nlohmann::json{
      {"arch", to_json(cfg.arch)},
      {"train", to_json(cfg.train)},
      {"data", to_json(cfg.data)},
      {"paths",
       {{"out_dir", cfg.paths.out_dir},
        {"checkpoint", cfg.paths.checkpoint},
        {"perceptual_weights", cfg.paths.perceptual_weights}}},
      {"gradcheck",
       {{"channels", cfg.gradcheck.channels},
        {"size", cfg.gradcheck.size},
        {"samples", cfg.gradcheck.samples},
        {"epsilon", cfg.gradcheck.epsilon},
        {"seed", cfg.gradcheck.seed}}},
  };
}

}  // namespace amisr::cli
