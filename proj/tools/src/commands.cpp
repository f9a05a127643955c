#include "amisr_cli/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "amisr/checkpoint.hpp"
#include "amisr/errors.hpp"
#include "amisr/gradcheck.hpp"
#include "amisr/metrics.hpp"
#include "amisr/network.hpp"
#include "amisr/parallel.hpp"
#include "amisr/resize.hpp"
#include "amisr/trainer.hpp"
#include "amisr_cli/run_config.hpp"

namespace amisr::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-5;

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

// SR and bicubic reports on a sample set, images pass through 8-bit
// quantization exactly as exported PNGs would.
template <typename T>
std::pair<MetricReport, MetricReport> holdout_reports(const ArchConfig& arch, ParamStore<T>& params,
                                                      const std::vector<Sample>& samples) {
  MetricReport sr_report, bicubic_report;
  for (const Sample& s : samples) {
    const ImageBuffer hr = quantize8(s.hr);
    const ImageBuffer sr = quantize8(tensor_to_image(infer(arch, params, images_to_tensor<T>({s.lr_up}))));
    const ImageBuffer bic = quantize8(s.lr_up);
    sr_report.add({s.name, psnr(sr, hr), ssim(sr, hr)});
    bicubic_report.add({s.name, psnr(bic, hr), ssim(bic, hr)});
  }
  return {sr_report, bicubic_report};
}

template <typename T>
PerceptualProxy<T> make_proxy(const RunConfig& cfg) {
  if (cfg.paths.perceptual_weights.empty()) return PerceptualProxy<T>();
  return PerceptualProxy<T>::load(cfg.paths.perceptual_weights);
}

template <typename T>
int train_typed(const RunConfig& cfg, bool gan, std::ostream& out, std::ostream& err) {
  const Dataset data(cfg.data);
  if (data.skipped() > 0) err << "skipped " << data.skipped() << " unreadable images\n";
  const fs::path out_dir = cfg.paths.out_dir;
  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "log.jsonl", std::ios::trunc);
  if (!log) throw IoError("cannot write " + (out_dir / "log.jsonl").string());
  {
    std::ofstream cfg_out(out_dir / "config.json", std::ios::trunc);
    cfg_out << to_json(cfg).dump(2) << "\n";
  }
  TrainOutputs outputs;
  outputs.checkpoint_dir = out_dir / "checkpoints";
  outputs.log = &log;
  outputs.progress_every = std::max(1, cfg.train.steps / 20);

  err << (gan ? "adversarial" : "plain") << " training: " << cfg.train.steps << " steps, "
      << data.train().size() << " training images, " << data.holdout().size() << " held out\n";
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult<T> result = gan ? train_gan<T>(cfg.arch, data.train(), cfg.train, cfg.data.shuffle_seed,
                                             make_proxy<T>(cfg), outputs)
                              : train<T>(cfg.arch, data.train(), cfg.train, cfg.data.shuffle_seed, outputs);
  err << "finished in " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";

  nlohmann::json summary{{"steps", cfg.train.steps},
                         {"checkpoints", result.checkpoints_written},
                         {"final_loss", result.log.empty() ? nlohmann::json(nullptr) : num(result.log.back().loss)},
                         {"out_dir", out_dir.string()}};
  if (!data.holdout().empty()) {
    ArchConfig arch = cfg.arch;
    arch.dtype = dtype_of<T>();
    auto [sr, bic] = holdout_reports(arch, result.params, data.holdout());
    const nlohmann::json report{{"sr", sr.to_json()}, {"bicubic", bic.to_json()}};
    std::ofstream(out_dir / "report.json", std::ios::trunc) << report.dump(2) << "\n";
    summary["holdout"] = {{"count", sr.count()},
                          {"mean_psnr_sr", num(sr.mean_psnr)},
                          {"mean_psnr_bicubic", num(bic.mean_psnr)},
                          {"mean_ssim_sr", num(sr.mean_ssim)},
                          {"mean_ssim_bicubic", num(bic.mean_ssim)}};
    err << "held-out PSNR: SR " << sr.mean_psnr << " dB, bicubic " << bic.mean_psnr << " dB\n";
  }
  out << summary.dump() << "\n";
  return kOk;
}

int cmd_train(const std::string& config_path, bool gan, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_run_config(config_path);
  if (cfg.arch.dtype == DType::f64) return train_typed<double>(cfg, gan, out, err);
  return train_typed<float>(cfg, gan, out, err);
}

template <typename T>
int infer_typed(const fs::path& checkpoint, const fs::path& input, const fs::path& output, std::ostream& out,
                std::ostream& err) {
  Checkpoint<T> ck = load_checkpoint<T>(checkpoint);
  const ArchConfig& arch = ck.config;
  const auto files = list_images(input, "*.png");
  if (files.empty()) throw ConfigError("infer: no PNG files in " + input.string());
  fs::create_directories(output);
  nlohmann::json written = nlohmann::json::array();
  for (const auto& path : files) {
    const ImageBuffer lr = read_png(path);
    if (lr.height * arch.scale != arch.input_size || lr.width * arch.scale != arch.input_size) {
      throw ConfigError("infer: '" + path.filename().string() + "' is " + std::to_string(lr.height) + "x" +
                        std::to_string(lr.width) + " but the checkpoint expects " +
                        std::to_string(arch.input_size / arch.scale) + "x" +
                        std::to_string(arch.input_size / arch.scale) + " inputs");
    }
    const ImageBuffer bic = upsample_to(lr, arch.input_size);
    const ImageBuffer sr = tensor_to_image(infer(arch, ck.params, images_to_tensor<T>({bic})));
    const std::string stem = path.stem().string();
    write_png(output / (stem + "_sr.png"), sr);
    write_png(output / (stem + "_bicubic.png"), bic);
    written.push_back(stem + "_sr.png");
    written.push_back(stem + "_bicubic.png");
  }
  err << "wrote " << written.size() << " images to " << output.string() << "\n";
  out << nlohmann::json{{"inputs", files.size()}, {"outputs", written}}.dump() << "\n";
  return kOk;
}

int cmd_infer(const fs::path& checkpoint, const fs::path& input, const fs::path& output, std::ostream& out,
              std::ostream& err) {
  if (peek_checkpoint_config(checkpoint).dtype == DType::f64) {
    return infer_typed<double>(checkpoint, input, output, out, err);
  }
  return infer_typed<float>(checkpoint, input, output, out, err);
}

int cmd_eval(const fs::path& sr, const fs::path& hr, const std::string& out_file, std::ostream& out,
             std::ostream& err) {
  const MetricReport report = evaluate_dirs(sr, hr);
  const std::string text = report.to_json().dump(2);
  if (!out_file.empty()) std::ofstream(out_file, std::ios::trunc) << text << "\n";
  out << text << "\n";
  err << report.count() << " pairs: mean PSNR " << report.mean_psnr << " dB, mean SSIM " << report.mean_ssim
      << "\n";
  return kOk;
}

// AMISR_ADJOINT_FAULT=<op>[:factor] corrupts that op's adjoint; used to prove
// the checker catches broken gradients.
void apply_fault_hook() {
  const char* env = std::getenv("AMISR_ADJOINT_FAULT");
  if (!env || !*env) return;
  std::string spec(env);
  double factor = 1.5;
  if (const auto colon = spec.find(':'); colon != std::string::npos) {
    factor = std::stod(spec.substr(colon + 1));
    spec = spec.substr(0, colon);
  }
  const auto kind = op_from_name(spec);
  if (!kind) throw ConfigError("AMISR_ADJOINT_FAULT names unknown op '" + spec + "'");
  set_adjoint_fault(*kind, factor);
}

int cmd_gradcheck(const std::string& config_path, const std::string& block, std::ostream& out, std::ostream& err) {
  GradCheckTargetConfig gc;
  if (!config_path.empty()) gc = load_run_config(config_path).gradcheck;
  std::vector<std::string> targets = gradcheck_targets();
  if (!block.empty()) {
    if (std::find(targets.begin(), targets.end(), block) == targets.end()) {
      throw ConfigError("gradcheck: unknown block '" + block + "'");
    }
    targets = {block};
  }
  apply_fault_hook();
  nlohmann::json rows = nlohmann::json::array();
  bool failed = false;
  for (const auto& t : targets) {
    GradCheckTargetConfig c = gc;
    if (t == "full" && c.size % 8 != 0) c.size = ((c.size + 7) / 8) * 8;
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckResult r = run_gradcheck_target(t, c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = r.max_rel_error < kGradTolerance;
    failed |= !ok;
    rows.push_back({{"block", t},
                    {"max_rel_error", r.max_rel_error},
                    {"coordinates", r.coordinates},
                    {"skipped", r.skipped},
                    {"pass", ok},
                    {"worst", {{"param", r.param}, {"index", r.index}, {"analytic", r.analytic}, {"numeric", r.numeric}}}});
    err << std::left << std::setw(6) << t << " max rel err " << std::scientific << std::setprecision(3)
        << r.max_rel_error << std::defaultfloat << " over " << r.coordinates << " coords (" << std::fixed
        << std::setprecision(1) << secs << " s)" << std::defaultfloat << (ok ? "" : "  FAIL") << "\n";
    if (!ok) {
      err << "  worst coordinate: " << r.param << "[" << r.index << "] analytic " << r.analytic << " numeric "
          << r.numeric << "\n";
    }
  }
  nlohmann::json report{{"tolerance", kGradTolerance}, {"epsilon", gc.epsilon}, {"blocks", rows}, {"pass", !failed}};
  if (failed) {
    // Name the op: the first failing isolated check. sum and mul come first,
    // since every other check reduces through them.
    const auto checks = check_ops(gc.seed, gc.epsilon);
    nlohmann::json suspects = nlohmann::json::array();
    for (const auto& c : checks) {
      if (c.max_rel_error >= kGradTolerance) suspects.push_back({{"op", c.op}, {"max_rel_error", c.max_rel_error}});
    }
    if (!suspects.empty()) {
      report["suspect_op"] = suspects[0]["op"];
      err << "suspect op: " << suspects[0]["op"].get<std::string>() << "\n";
    }
    report["op_checks"] = suspects;
  }
  out << report.dump() << "\n";
  return failed ? kCheckFailed : kOk;
}

template <typename T>
nlohmann::json ablate_variant(const RunConfig& cfg, const std::string& variant, const Dataset& data,
                              std::ostream& err) {
  ArchConfig arch = make_variant(cfg.arch, variant);
  arch.dtype = dtype_of<T>();
  TrainOutputs outputs;
  outputs.progress_every = std::max(1, cfg.train.steps / 5);
  err << "variant " << variant << ": training " << cfg.train.steps << " steps\n";
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult<T> result = train<T>(arch, data.train(), cfg.train, cfg.data.shuffle_seed, outputs);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto [sr, bic] = holdout_reports(arch, result.params, data.holdout());
  return {{"variant", variant},
          {"train_seconds", seconds},
          {"params", param_count(arch)},
          {"steps", cfg.train.steps},
          {"final_loss", result.log.empty() ? nlohmann::json(nullptr) : num(result.log.back().loss)},
          {"psnr", num(sr.mean_psnr)},
          {"ssim", num(sr.mean_ssim)},
          {"bicubic_psnr", num(bic.mean_psnr)},
          {"bicubic_ssim", num(bic.mean_ssim)}};
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& variants, std::ostream& out,
               std::ostream& err) {
  const RunConfig cfg = load_run_config(config_path);
  if (variants.empty()) throw ConfigError("ablate: --variants is empty");
  for (const auto& v : variants) make_variant(cfg.arch, v);  // reject unknown names before training
  const Dataset data(cfg.data);
  if (data.holdout().empty()) throw ConfigError("ablate: data.holdout must be positive to score variants");
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& v : variants) {
    rows.push_back(cfg.arch.dtype == DType::f64 ? ablate_variant<double>(cfg, v, data, err)
                                                : ablate_variant<float>(cfg, v, data, err));
  }
  std::ostringstream table;
  table << std::left << std::setw(22) << "variant" << std::right << std::setw(10) << "params" << std::setw(8)
        << "steps" << std::setw(12) << "final_loss" << std::setw(10) << "psnr" << std::setw(9) << "ssim" << "\n";
  for (const auto& r : rows) {
    table << std::left << std::setw(22) << r["variant"].get<std::string>() << std::right << std::setw(10)
          << r["params"].get<int64_t>() << std::setw(8) << r["steps"].get<int>() << std::fixed << std::setprecision(5)
          << std::setw(12) << (r["final_loss"].is_null() ? NAN : r["final_loss"].get<double>())
          << std::setprecision(3) << std::setw(10) << (r["psnr"].is_null() ? INFINITY : r["psnr"].get<double>())
          << std::setprecision(4) << std::setw(9) << r["ssim"].get<double>() << std::defaultfloat << "\n";
  }
  err << table.str();
  const fs::path out_dir = cfg.paths.out_dir;
  fs::create_directories(out_dir);
  const nlohmann::json result{{"rows", rows}, {"holdout", data.holdout().size()}};
  std::ofstream(out_dir / "ablation.json", std::ios::trunc) << result.dump(2) << "\n";
  std::ofstream(out_dir / "ablation.txt", std::ios::trunc) << table.str();
  out << result.dump() << "\n";
  return kOk;
}

int cmd_info(const fs::path& checkpoint, std::ostream& out, std::ostream& err) {
  const auto bytes = read_file_bytes(checkpoint);
  const nlohmann::json header = decode_header(bytes);
  const ArchConfig arch = arch_from_json(header.at("config"));
  // Full decode validates the payload, not only the header.
  int64_t scalars = 0;
  if (arch.dtype == DType::f64) {
    scalars = load_checkpoint<double>(checkpoint).params.scalar_count();
  } else {
    scalars = load_checkpoint<float>(checkpoint).params.scalar_count();
  }
  const nlohmann::json info{{"arch", to_json(arch)},
                            {"params", scalars},
                            {"macs", mac_estimate(arch)},
                            {"tensors", header.at("tensors").size()},
                            {"bytes", bytes.size()}};
  err << "base channels " << arch.base_channels << ", input " << arch.input_size << "x" << arch.input_size
      << ", scale x" << arch.scale << ", " << to_string(arch.dtype) << "\n"
      << "parameters " << scalars << ", MACs per image " << mac_estimate(arch) << "\n";
  out << info.dump() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Face super-resolution: training, inference, evaluation and verification", "amisr"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config, block, checkpoint, input, output, sr_dir, hr_dir, out_file;
  bool gan = false;
  std::vector<std::string> variants;

  auto* train_cmd = app.add_subcommand("train", "Train from a RunConfig");
  train_cmd->add_option("--config", config, "RunConfig JSON")->required();
  train_cmd->add_flag("--gan", gan, "Adversarial training with a discriminator");

  auto* infer_cmd = app.add_subcommand("infer", "Super-resolve every PNG in a directory");
  infer_cmd->add_option("--checkpoint", checkpoint)->required();
  infer_cmd->add_option("--input", input, "Directory of LR PNGs")->required();
  infer_cmd->add_option("--output", output)->required();

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of SR against HR images with matching names");
  eval_cmd->add_option("--sr", sr_dir)->required();
  eval_cmd->add_option("--hr", hr_dir)->required();
  eval_cmd->add_option("--out", out_file, "Also write the report here");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every block");
  grad_cmd->add_option("--config", config, "RunConfig JSON (gradcheck section)");
  grad_cmd->add_option("--block", block, "sa, rdfe, skaf, lgfi, edff or full");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and score ablation variants");
  ablate_cmd->add_option("--config", config)->required();
  ablate_cmd->add_option("--variants", variants, "Comma-separated variant names")->required()->delimiter(',');

  auto* info_cmd = app.add_subcommand("info", "Architecture, parameter count and MACs of a checkpoint");
  info_cmd->add_option("--checkpoint", checkpoint)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(config, gan, out, err);
    if (*infer_cmd) return cmd_infer(checkpoint, input, output, out, err);
    if (*eval_cmd) return cmd_eval(sr_dir, hr_dir, out_file, out, err);
    if (*grad_cmd) return cmd_gradcheck(config, block, out, err);
    if (*ablate_cmd) return cmd_ablate(config, variants, out, err);
    if (*info_cmd) return cmd_info(checkpoint, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kUsage;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace amisr::cli
