#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "amisr/checkpoint.hpp"
#include "amisr/errors.hpp"
#include "amisr/gradcheck.hpp"
#include "amisr/metrics.hpp"
#include "amisr/network.hpp"
#include "amisr_cli/commands.hpp"
#include "amisr_cli/run_config.hpp"
#include "test_util.hpp"

using namespace amisr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
  nlohmann::json json() const { return nlohmann::json::parse(out.substr(0, out.find('\n'))); }
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

nlohmann::json tiny_config(const fs::path& out_dir, int steps = 3, int holdout = 1) {
  return {{"arch", {{"base_channels", 4}, {"heads", 2}, {"au_reduction", 2}, {"input_size", 32}, {"scale", 4}}},
          {"train", {{"steps", steps}, {"batch", 1}, {"lr", 1e-3}, {"checkpoint_every", 2}, {"seed", 1}}},
          {"data", {{"synthetic", {{"count", 3}, {"seed", 4}, {"size", 32}}}, {"scale", 4}, {"holdout", holdout}}},
          {"paths", {{"out_dir", out_dir.string()}}}};
}

fs::path write_config(const fs::path& path, const nlohmann::json& j) {
  std::ofstream(path) << j.dump(2);
  return path;
}

const fs::path kMetrics = fs::path(AMISR_TEST_DATA) / "metrics";

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run({"train"}).code, cli::kUsage);
  EXPECT_EQ(run({"eval", "--sr", "x"}).code, cli::kUsage);
  const auto bad = run({"train", "--config", "c.json", "--bogus"});
  EXPECT_EQ(bad.code, cli::kUsage);
  EXPECT_NE(bad.err.find("usage error"), std::string::npos);
}

TEST(Cli, HelpListsCommands) {
  const auto h = run({"--help"});
  EXPECT_EQ(h.code, cli::kOk);
  for (const char* cmd : {"train", "infer", "eval", "gradcheck", "ablate", "info"})
    EXPECT_NE(h.out.find(cmd), std::string::npos) << cmd;
}

TEST(Cli, ConfigProblemsAreUsageErrors) {
  testutil::TempDir dir;
  auto cfg = tiny_config(dir / "run");
  cfg["train"]["learning_rate"] = 1.0;
  const auto unknown = run({"train", "--config", write_config(dir / "a.json", cfg).string()});
  EXPECT_EQ(unknown.code, cli::kUsage);
  EXPECT_NE(unknown.err.find("learning_rate"), std::string::npos) << unknown.err;

  EXPECT_EQ(run({"train", "--config", (dir / "missing.json").string()}).code, cli::kUsage);

  std::ofstream(dir / "broken.json") << "{ \"arch\": ";
  EXPECT_EQ(run({"train", "--config", (dir / "broken.json").string()}).code, cli::kUsage);

  cfg = tiny_config(dir / "run");
  cfg["data"]["batch_size"] = 2;  // disagrees with train.batch
  EXPECT_EQ(run({"train", "--config", write_config(dir / "b.json", cfg).string()}).code, cli::kUsage);
}

TEST(RunConfig, SectionsRoundTrip) {
  const auto j = tiny_config("somewhere");
  const auto cfg = cli::run_config_from_json(j);
  EXPECT_EQ(cfg.arch.base_channels, 4);
  EXPECT_EQ(cfg.train.steps, 3);
  EXPECT_EQ(cfg.data.holdout, 1);
  EXPECT_EQ(cfg.paths.out_dir, "somewhere");
  const auto again = cli::run_config_from_json(cli::to_json(cfg));
  EXPECT_EQ(again.arch, cfg.arch);
  EXPECT_EQ(again.train, cfg.train);
  EXPECT_EQ(again.data, cfg.data);
  EXPECT_THROW(cli::run_config_from_json({{"extra", 1}}), ConfigError);
  EXPECT_NO_THROW(cli::run_config_from_json(nlohmann::json::object()));
}

// train -> info -> infer -> eval on one tiny run.
TEST(Cli, EndToEnd) {
  testutil::TempDir dir;
  const fs::path run_dir = dir / "run";
  const auto trained = run({"train", "--config", write_config(dir / "c.json", tiny_config(run_dir)).string()});
  ASSERT_EQ(trained.code, cli::kOk) << trained.err;
  const auto summary = trained.json();
  EXPECT_EQ(summary["steps"], 3);
  EXPECT_EQ(summary["checkpoints"], 3);  // steps 0 and 2, then final
  EXPECT_EQ(summary["holdout"]["count"], 1);
  EXPECT_TRUE(fs::exists(run_dir / "config.json"));
  EXPECT_TRUE(fs::exists(run_dir / "report.json"));
  const fs::path ck = run_dir / "checkpoints" / "final.amck";
  ASSERT_TRUE(fs::exists(ck));
  {
    std::ifstream log(run_dir / "log.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(log, line)) EXPECT_EQ(nlohmann::json::parse(line)["step"], n++);
    EXPECT_EQ(n, 3);
  }

  const auto info = run({"info", "--checkpoint", ck.string()});
  ASSERT_EQ(info.code, cli::kOk) << info.err;
  const auto arch = peek_checkpoint_config(ck);
  EXPECT_EQ(info.json()["params"], param_count(arch));
  EXPECT_EQ(info.json()["macs"], mac_estimate(arch));

  fs::create_directories(dir / "lr");
  write_png(dir / "lr" / "face.png", ImageBuffer(8, 8, 0.4f));
  const auto inferred = run({"infer", "--checkpoint", ck.string(), "--input", (dir / "lr").string(), "--output",
                             (dir / "sr").string()});
  ASSERT_EQ(inferred.code, cli::kOk) << inferred.err;
  EXPECT_EQ(inferred.json()["inputs"], 1);
  const auto sr = read_png(dir / "sr" / "face_sr.png");
  EXPECT_EQ(sr.height, 32);
  EXPECT_TRUE(fs::exists(dir / "sr" / "face_bicubic.png"));

  write_png(dir / "lr" / "wrong.png", ImageBuffer(9, 8, 0.4f));
  const auto wrong = run({"infer", "--checkpoint", ck.string(), "--input", (dir / "lr").string(), "--output",
                          (dir / "sr2").string()});
  EXPECT_EQ(wrong.code, cli::kUsage);
  EXPECT_NE(wrong.err.find("wrong.png"), std::string::npos) << wrong.err;
}

TEST(Cli, InfoRejectsCorruptCheckpoint) {
  testutil::TempDir dir;
  std::ofstream(dir / "x.amck") << "AMCKgarbage";
  const auto r = run({"info", "--checkpoint", (dir / "x.amck").string()});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("format error"), std::string::npos);
}

TEST(Cli, EvalPrintsAndWritesReport) {
  testutil::TempDir dir;
  const auto r = run({"eval", "--sr", (kMetrics / "sr").string(), "--hr", (kMetrics / "hr").string(), "--out",
                      (dir / "report.json").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto expected = evaluate_dirs(kMetrics / "sr", kMetrics / "hr").to_json();
  EXPECT_EQ(nlohmann::json::parse(r.out), expected);
  std::ifstream in(dir / "report.json");
  EXPECT_EQ(nlohmann::json::parse(in), expected);

  EXPECT_EQ(run({"eval", "--sr", (kMetrics / "sr").string(), "--hr", (dir / "nope").string()}).code, cli::kUsage);
}

TEST(Cli, GradcheckSingleBlock) {
  const auto r = run({"gradcheck", "--block", "sa"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto j = r.json();
  EXPECT_TRUE(j["pass"].get<bool>());
  ASSERT_EQ(j["blocks"].size(), 1u);
  EXPECT_EQ(j["blocks"][0]["block"], "sa");
  EXPECT_GE(j["blocks"][0]["coordinates"].get<int>(), 100);
  EXPECT_EQ(run({"gradcheck", "--block", "nope"}).code, cli::kUsage);
}

TEST(Cli, GradcheckReportsInjectedFault) {
  ::setenv("AMISR_ADJOINT_FAULT", "softmax:1.01", 1);
  const auto r = run({"gradcheck", "--block", "sa"});
  ::unsetenv("AMISR_ADJOINT_FAULT");
  set_adjoint_fault(std::nullopt);
  EXPECT_EQ(r.code, cli::kCheckFailed);
  const auto j = r.json();
  EXPECT_FALSE(j["pass"].get<bool>());
  EXPECT_EQ(j["suspect_op"], "softmax");

  ::setenv("AMISR_ADJOINT_FAULT", "nonsense", 1);
  const auto bad = run({"gradcheck", "--block", "sa"});
  ::unsetenv("AMISR_ADJOINT_FAULT");
  EXPECT_EQ(bad.code, cli::kUsage);
}

TEST(Cli, AblateTinyRun) {
  testutil::TempDir dir;
  const auto cfg = write_config(dir / "c.json", tiny_config(dir / "abl", 2, 1));
  const auto r = run({"ablate", "--config", cfg.string(), "--variants", "full,no_sa"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto j = r.json();
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][1]["variant"], "no_sa");
  EXPECT_LT(j["rows"][1]["params"].get<int64_t>(), j["rows"][0]["params"].get<int64_t>());
  EXPECT_TRUE(j["rows"][0].contains("train_seconds"));
  EXPECT_TRUE(fs::exists(dir / "abl" / "ablation.json"));

  EXPECT_EQ(run({"ablate", "--config", cfg.string(), "--variants", "full,no_such"}).code, cli::kUsage);
  const auto no_holdout = write_config(dir / "d.json", tiny_config(dir / "abl2", 2, 0));
  EXPECT_EQ(run({"ablate", "--config", no_holdout.string(), "--variants", "full"}).code, cli::kUsage);
}
