#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emo/emoboost.hpp"
#include "emo/mock_detector.hpp"
#include "emo/report.hpp"
#include "emo/splits.hpp"
#include "emo/synthetic.hpp"
#include "emo/trainer.hpp"

namespace emo::cli {

struct SplitSettings {
  SplitRatios ratios;
  double val_test_fraction = 0.0;  // 0 disables the val-test carve-out
  std::vector<TagGroup> leave_one_out;
};

struct DetectorSettings {
  bool enabled = false;
  std::string type = "mock";  // "mock" or "sidecar"
  MockDetectorConfig mock;
  std::filesystem::path sidecar_index;
};

struct ReportInput {
  std::string model;
  std::string scale = "fraction";
  std::vector<SplitMetrics> splits;
};

struct RunConfig {
  nlohmann::json raw;
  std::uint64_t seed = 0;
  std::filesystem::path out;

  std::optional<SynthConfig> synth;
  std::optional<std::filesystem::path> manifest;  // external data instead of synth
  SplitSettings splits;
  TrainConfig train;
  std::vector<std::string> train_plans;  // empty = every plan
  DetectorSettings detector;
  EmoBoostConfig emoboost;
  std::string ablate_plan = "in_domain";
  std::vector<ReportInput> report_inputs;
};

/// Parses and validates a config. Unknown keys are rejected. Flags may only
/// repeat a value the config already holds; a different value is an error.
/// Relative paths inside the config resolve against config_dir.
RunConfig parse_config(const nlohmann::json& j, std::optional<std::uint64_t> seed_flag,
                       std::optional<std::filesystem::path> out_flag, const std::filesystem::path& config_dir);

inline constexpr std::string_view kCommands[] = {"synth", "splits", "train-emoforensics", "train-emoboost",
                                                 "eval",  "ablate", "report"};

/// Runs one command. Throws ConfigError for invalid input, Error otherwise.
void run(std::string_view command, const RunConfig& cfg, std::ostream& log);

/// Entry point: returns 0 on success, 2 for configuration errors, 1 for
/// runtime errors. Errors go to err as one JSON line.
int main_entry(int argc, char** argv, std::ostream& log, std::ostream& err);

}  // namespace emo::cli
