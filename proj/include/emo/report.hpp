#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace emo {

double average_auc(std::span<const double> split_aucs);

/// Sum over splits of |auc_i - mean(auc)|.
double stability_area(std::span<const double> split_aucs);

struct SplitMetrics {
  std::string name;
  double auc = 0.0;
  std::optional<double> ap;  // absent for ingested values
  std::size_t num_real = 0;
  std::size_t num_fake = 0;
};

struct EvalReport {
  std::string model;
  std::vector<SplitMetrics> splits;
  double average_auc = 0.0;
  double stability_area = 0.0;
  /// "fraction" for computed metrics, "percent" when ingested values are in
  /// percent.
  std::string scale = "fraction";
};

/// Fills average_auc and stability_area from the split AUCs.
EvalReport make_report(std::string model, std::vector<SplitMetrics> splits, std::string scale = "fraction");

/// Scores and labels of one split; computes AUC and AP.
SplitMetrics score_split(std::string name, std::span<const double> scores, std::span<const int> labels);

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

/// Split columns followed by an Average column.
std::string format_table(std::span<const EvalReport> reports);

}  // namespace emo
