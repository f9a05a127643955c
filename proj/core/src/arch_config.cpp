#include "amisr/arch_config.hpp"

#include <algorithm>
#include <set>

#include "amisr/errors.hpp"

namespace amisr {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("arch: " + message);
}

}  // namespace

void ArchConfig::validate() const {
  require(base_channels >= 1, "base_channels must be positive");
  require(heads >= 1, "heads must be positive");
  require(input_size >= 8 && input_size % 8 == 0, "input_size must be a positive multiple of 8, got " +
                                                      std::to_string(input_size));
  require(scale == 2 || scale == 4 || scale == 8, "scale must be 2, 4 or 8");
  require(input_size % scale == 0, "input_size must be divisible by scale");
  require(au_reduction >= 1, "au_reduction must be positive");
  if (!no_sa) require(base_channels % heads == 0, "base_channels must be divisible by heads");
  if (!no_rdfe && !ffn_instead_of_rdfe) {
    require(base_channels % au_reduction == 0, "base_channels must be divisible by au_reduction");
  }
  require(rdfe_single_path == 0 || rdfe_single_path == 3 || rdfe_single_path == 5 || rdfe_single_path == 7,
          "rdfe_single_path must be 0, 3, 5 or 7");
  require(!(no_sa && no_rdfe), "no_sa and no_rdfe together leave LGFI without branches");
  require(!(no_rdfe && ffn_instead_of_rdfe), "no_rdfe and ffn_instead_of_rdfe are exclusive");
}

blocks::LgfiOptions ArchConfig::lgfi_options() const {
  blocks::LgfiOptions o;
  o.use_sa = !no_sa;
  o.use_rdfe = !no_rdfe && !ffn_instead_of_rdfe;
  o.ffn_instead_of_rdfe = ffn_instead_of_rdfe;
  o.use_skaf = !no_skaf;
  o.heads = heads;
  o.rdfe.au_reduction = au_reduction;
  if (rdfe_single_path != 0) o.rdfe.kernels = {rdfe_single_path};
  o.skaf_pool = skaf_pool;
  return o;
}

nlohmann::json to_json(const ArchConfig& c) {
  return nlohmann::json{
      {"base_channels", c.base_channels},
      {"heads", c.heads},
      {"input_size", c.input_size},
      {"scale", c.scale},
      {"au_reduction", c.au_reduction},
      {"no_sa", c.no_sa},
      {"no_rdfe", c.no_rdfe},
      {"no_skaf", c.no_skaf},
      {"ffn_instead_of_rdfe", c.ffn_instead_of_rdfe},
      {"rdfe_single_path", c.rdfe_single_path},
      {"skaf_pool", blocks::to_string(c.skaf_pool)},
      {"no_edff", c.no_edff},
      {"dtype", to_string(c.dtype)},
  };
}

ArchConfig arch_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("arch: expected a JSON object");
  static const std::set<std::string> known{"base_channels", "heads",   "input_size", "scale",
                                           "au_reduction",  "no_sa",   "no_rdfe",    "no_skaf",
                                           "ffn_instead_of_rdfe",      "rdfe_single_path",
                                           "skaf_pool",     "no_edff", "dtype"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("arch: unknown key '" + key + "'");
  }
  ArchConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("base_channels", c.base_channels);
    get("heads", c.heads);
    get("input_size", c.input_size);
    get("scale", c.scale);
    get("au_reduction", c.au_reduction);
    get("no_sa", c.no_sa);
    get("no_rdfe", c.no_rdfe);
    get("no_skaf", c.no_skaf);
    get("ffn_instead_of_rdfe", c.ffn_instead_of_rdfe);
    get("rdfe_single_path", c.rdfe_single_path);
    get("no_edff", c.no_edff);
    if (j.contains("skaf_pool")) c.skaf_pool = blocks::skaf_pool_from_string(j.at("skaf_pool").get<std::string>());
    if (j.contains("dtype")) c.dtype = dtype_from_string(j.at("dtype").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("arch: ") + e.what());
  }
  c.validate();
  return c;
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{
      "full",          "no_sa",         "no_rdfe",       "no_skaf",       "ffn_instead_of_rdfe",
      "rdfe_single_path_3", "rdfe_single_path_5", "rdfe_single_path_7",
      "skaf_pool_avg", "skaf_pool_max", "skaf_pool_both", "no_edff"};
  return names;
}

ArchConfig make_variant(const ArchConfig& base, const std::string& flag) {
  ArchConfig c = base;
  if (flag != "full" && std::find(variant_names().begin(), variant_names().end(), flag) == variant_names().end()) {
    std::string list;
    for (const auto& n : variant_names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown variant '" + flag + "' (known: " + list + ")");
  }
  if (flag == "full") {
    ArchConfig clean;
    clean.base_channels = base.base_channels;
    clean.heads = base.heads;
    clean.input_size = base.input_size;
    clean.scale = base.scale;
    clean.au_reduction = base.au_reduction;
    clean.dtype = base.dtype;
    c = clean;
  } else if (flag == "no_sa") {
    c.no_sa = true;
  } else if (flag == "no_rdfe") {
    c.no_rdfe = true;
  } else if (flag == "no_skaf") {
    c.no_skaf = true;
  } else if (flag == "ffn_instead_of_rdfe") {
    c.ffn_instead_of_rdfe = true;
  } else if (flag.rfind("rdfe_single_path_", 0) == 0) {
    c.rdfe_single_path = std::stoi(flag.substr(17));
  } else if (flag.rfind("skaf_pool_", 0) == 0) {
    c.skaf_pool = blocks::skaf_pool_from_string(flag.substr(10));
  } else if (flag == "no_edff") {
    c.no_edff = true;
  }
  c.validate();
  return c;
}

}  // namespace amisr
