#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "emo/cli.hpp"
#include "emo/error.hpp"
#include "test_util.hpp"

using namespace emo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json example_config() {
  std::ifstream in(fs::path(EMO_SOURCE_DIR) / "configs" / "example.json");
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Outcome {
  int code;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "emoforensics");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream log, err;
  const int code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), log, err);
  return {code, err.str()};
}

// Writes cfg next to an output directory "run" and returns the config path.
fs::path write_config(const fs::path& dir, json cfg) {
  cfg["out"] = "run";
  const auto path = dir / "config.json";
  std::ofstream(path) << cfg.dump(2);
  return path;
}

void pipeline(const fs::path& config) {
  for (const char* cmd : {"synth", "splits", "train-emoforensics", "eval"}) {
    const auto r = run_cli({cmd, "-c", config.string()});
    ASSERT_EQ(r.code, 0) << cmd << ": " << r.err;
  }
}

}  // namespace

TEST(Cli, PipelineProducesReport) {
  emo::testing::TempDir dir("cli_pipeline");
  const auto config = write_config(dir.path(), example_config());
  pipeline(config);
  const auto report = json::parse(slurp(dir.path() / "run" / "reports" / "eval.json"));
  ASSERT_FALSE(report["splits"].empty());
  for (const auto& s : report["splits"]) {
    const double auc = s["auc"];
    EXPECT_GE(auc, 0.0);
    EXPECT_LE(auc, 1.0);
  }
  EXPECT_TRUE(fs::exists(dir.path() / "run" / "provenance" / "eval.json"));
  EXPECT_TRUE(fs::exists(dir.path() / "run" / "reports" / "eval.txt"));
}

TEST(Cli, PipelineIsByteDeterministic) {
  emo::testing::TempDir a("cli_det_a"), b("cli_det_b");
  pipeline(write_config(a.path(), example_config()));
  pipeline(write_config(b.path(), example_config()));
  EXPECT_EQ(slurp(a.path() / "run" / "reports" / "eval.json"), slurp(b.path() / "run" / "reports" / "eval.json"));
}

TEST(Cli, EvalWithoutCheckpointIsConfigError) {
  emo::testing::TempDir dir("cli_missing");
  const auto config = write_config(dir.path(), example_config());
  ASSERT_EQ(run_cli({"synth", "-c", config.string()}).code, 0);
  ASSERT_EQ(run_cli({"splits", "-c", config.string()}).code, 0);
  const auto r = run_cli({"eval", "-c", config.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checkpoint not found"), std::string::npos) << r.err;
  const auto parsed = json::parse(r.err);
  EXPECT_EQ(parsed["error"], "config");
}

TEST(Cli, ConfigErrors) {
  emo::testing::TempDir dir("cli_errors");
  auto cfg = example_config();
  cfg["train"]["learning_rat"] = 0.1;
  EXPECT_EQ(run_cli({"synth", "-c", write_config(dir.path(), cfg).string()}).code, 2);

  const auto good = write_config(dir.path(), example_config());
  EXPECT_EQ(run_cli({"synth", "-c", good.string(), "--seed", "7"}).code, 2);   // conflicts with 42
  EXPECT_EQ(run_cli({"synth", "-c", good.string(), "--seed", "42"}).code, 0);  // repeats it
  EXPECT_EQ(run_cli({"frobnicate", "-c", good.string()}).code, 2);
  EXPECT_EQ(run_cli({"synth", "-c", (dir.path() / "absent.json").string()}).code, 2);
}

TEST(Cli, ParseConfigAppliesSections) {
  const auto cfg = cli::parse_config(example_config(), std::nullopt, std::nullopt, "/cfg");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.train.encoder.model_dim, 16);
  EXPECT_EQ(cfg.splits.leave_one_out.size(), 1u);
  EXPECT_EQ(cfg.detector.mock.blind_tags, std::set<std::string>{"A"});
  ASSERT_TRUE(cfg.synth.has_value());
  EXPECT_EQ(cfg.synth->total(), 400u);
  EXPECT_THROW(cli::parse_config(example_config(), 1, std::nullopt, "/cfg"), ConfigError);
}

TEST(Cli, ReportIngestsPublishedValues) {
  emo::testing::TempDir dir("cli_report");
  json cfg = {{"seed", 0},
              {"report",
               {{"inputs",
                 {{{"model", "EmoForensics"},
                   {"scale", "percent"},
                   {"splits",
                    {{{"name", "s1"}, {"auc", 70.98}},
                     {{"name", "s2"}, {"auc", 68.85}},
                     {{"name", "s3"}, {"auc", 70.17}},
                     {{"name", "s4"}, {"auc", 73.00}},
                     {{"name", "s5"}, {"auc", 69.26}},
                     {{"name", "s6"}, {"auc", 63.54}}}}}}}}}};
  const auto config = write_config(dir.path(), cfg);
  const auto r = run_cli({"report", "-c", config.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(slurp(dir.path() / "run" / "reports" / "report.json"));
  EXPECT_NEAR(report["reports"][0]["stability_area"].get<double>(), 12.50, 0.005);
}
