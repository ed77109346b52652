#include "emo/report.hpp"

#include <cmath>
#include <cstdio>

#include "emo/error.hpp"
#include "emo/metrics.hpp"

namespace emo {

double average_auc(std::span<const double> split_aucs) {
  if (split_aucs.empty()) throw Error("average_auc: no splits");
  // Running mean: exact for constant lists, unlike sum / n.
  double mean = 0.0;
  std::size_t k = 0;
  for (double a : split_aucs) mean += (a - mean) / static_cast<double>(++k);
  return mean;
}

double stability_area(std::span<const double> split_aucs) {
  const double mean = average_auc(split_aucs);
  double area = 0.0;
  for (double a : split_aucs) area += std::abs(a - mean);
  return area;
}

EvalReport make_report(std::string model, std::vector<SplitMetrics> splits, std::string scale) {
  if (scale != "fraction" && scale != "percent") throw ConfigError("report scale must be 'fraction' or 'percent'");
  const double hi = scale == "percent" ? 100.0 : 1.0;
  std::vector<double> aucs;
  for (const auto& s : splits) {
    if (!(s.auc >= 0.0 && s.auc <= hi)) throw Error("split '" + s.name + "' has AUC outside [0, " + std::to_string(hi) + "]");
    aucs.push_back(s.auc);
  }
  EvalReport r;
  r.model = std::move(model);
  r.splits = std::move(splits);
  r.average_auc = average_auc(aucs);
  r.stability_area = stability_area(aucs);
  r.scale = std::move(scale);
  return r;
}

SplitMetrics score_split(std::string name, std::span<const double> scores, std::span<const int> labels) {
  SplitMetrics m;
  m.name = std::move(name);
  m.auc = roc_auc(scores, labels);
  m.ap = average_precision(scores, labels);
  for (int l : labels) (l == 1 ? m.num_fake : m.num_real)++;
  return m;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& s : r.splits) {
    nlohmann::json j{{"name", s.name}, {"auc", s.auc}, {"num_real", s.num_real}, {"num_fake", s.num_fake}};
    j["ap"] = s.ap ? nlohmann::json(*s.ap) : nlohmann::json(nullptr);
    splits.push_back(std::move(j));
  }
  return {{"model", r.model},
          {"scale", r.scale},
          {"splits", std::move(splits)},
          {"average_auc", r.average_auc},
          {"stability_area", r.stability_area}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    std::vector<SplitMetrics> splits;
    for (const auto& s : j.at("splits")) {
      SplitMetrics m;
      m.name = s.at("name").get<std::string>();
      m.auc = s.at("auc").get<double>();
      if (s.contains("ap") && !s["ap"].is_null()) m.ap = s["ap"].get<double>();
      m.num_real = s.value("num_real", std::size_t{0});
      m.num_fake = s.value("num_fake", std::size_t{0});
      splits.push_back(std::move(m));
    }
    return make_report(j.value("model", std::string{}), std::move(splits), j.value("scale", std::string("fraction")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad report: ") + e.what());
  }
}

std::string format_table(std::span<const EvalReport> reports) {
  if (reports.empty()) return {};
  const auto& cols = reports.front().splits;
  std::size_t model_w = 5;
  for (const auto& r : reports) model_w = std::max(model_w, r.model.size());
  std::string out;
  char buf[64];
  auto cell = [&](const std::string& s) {
    std::snprintf(buf, sizeof(buf), " %10s", s.c_str());
    out += buf;
  };
  out += std::string("Model") + std::string(model_w - 5, ' ');
  for (const auto& c : cols) cell(c.name.substr(0, 10));
  cell("Average");
  cell("Area");
  out += "\n";
  for (const auto& r : reports) {
    out += r.model + std::string(model_w - r.model.size(), ' ');
    const double k = r.scale == "percent" ? 1.0 : 100.0;
    for (const auto& s : r.splits) {
      std::snprintf(buf, sizeof(buf), "%.2f", s.auc * k);
      cell(buf);
    }
    std::snprintf(buf, sizeof(buf), "%.2f", r.average_auc * k);
    cell(buf);
    std::snprintf(buf, sizeof(buf), "%.2f", r.stability_area * k);
    cell(buf);
    out += "\n";
  }
  return out;
}

}  // namespace emo
