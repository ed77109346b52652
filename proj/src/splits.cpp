#include "emo/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "emo/error.hpp"
#include "emo/rng.hpp"

namespace emo {

std::vector<std::string> SplitPlan::reporting_test() const {
  std::vector<std::string> out = test;
  out.insert(out.end(), val_test.begin(), val_test.end());
  return out;
}

SplitPlan make_in_domain_split(const DatasetManifest& manifest, SplitRatios ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double x : r) {
    if (!(x >= 0.0)) throw ConfigError("split ratios must be non-negative");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (manifest.samples.empty()) throw Error("cannot split an empty manifest");

  std::vector<std::string> keys;
  std::map<std::string, std::vector<std::string>> members;
  for (const Sample& s : manifest.samples) {
    const std::string& key = s.group_key.empty() ? s.id : s.group_key;
    auto [it, inserted] = members.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(s.id);
  }
  const std::size_t g = keys.size();
  const std::size_t needed = static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](double x) { return x > 0; }));
  if (g < needed) throw Error("fewer groups (" + std::to_string(g) + ") than split parts (" + std::to_string(needed) + ")");

  // Largest-remainder rounding of the group counts.
  std::array<std::size_t, 3> count{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = r[k] * static_cast<double>(g);
    count[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[k] = exact - static_cast<double>(count[k]);
    assigned += count[k];
  }
  while (assigned < g) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (rem[k] > rem[best]) best = k;
    }
    ++count[best];
    rem[best] = -1.0;
    ++assigned;
  }
  for (int k = 0; k < 3; ++k) {
    if (r[k] > 0 && count[k] == 0) {
      const int donor = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
      --count[donor];
      ++count[k];
    }
  }

  Rng rng(derive_seed(seed, "splits/in_domain"));
  rng.shuffle(keys);
  SplitPlan plan;
  plan.name = "in_domain";
  std::vector<std::string>* parts[3] = {&plan.train, &plan.val, &plan.test};
  std::size_t next = 0;
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < count[k]; ++i, ++next) {
      const auto& ids = members[keys[next]];
      parts[k]->insert(parts[k]->end(), ids.begin(), ids.end());
    }
  }
  // Keep manifest order inside each part.
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) pos[manifest.samples[i].id] = i;
  for (auto* p : parts) std::sort(p->begin(), p->end(), [&](const auto& a, const auto& b) { return pos[a] < pos[b]; });
  return plan;
}

std::vector<SplitPlan> make_leave_one_out_splits(const DatasetManifest& manifest, const std::vector<TagGroup>& groups,
                                                 const SplitPlan& base) {
  std::set<std::string> present;
  for (const Sample& s : manifest.samples) present.insert(s.manipulation_tags.begin(), s.manipulation_tags.end());
  std::vector<SplitPlan> plans;
  for (const TagGroup& group : groups) {
    if (group.tags.empty()) throw ConfigError("tag group '" + group.name + "' is empty");
    for (const auto& t : group.tags) {
      if (!present.count(t)) throw ConfigError("tag '" + t + "' does not appear in the manifest");
    }
    SplitPlan plan;
    plan.name = group.name;
    plan.held_out_tags = group.tags;
    auto keep = [&](const std::vector<std::string>& ids, std::vector<std::string>& out) {
      for (const auto& id : ids) {
        if (!manifest.find(id).has_any_tag(group.tags)) out.push_back(id);
      }
    };
    keep(base.train, plan.train);
    keep(base.val, plan.val);
    std::set<std::string> base_test(base.test.begin(), base.test.end());
    base_test.insert(base.val_test.begin(), base.val_test.end());
    for (const Sample& s : manifest.samples) {
      if (s.is_fake() ? s.has_any_tag(group.tags) : base_test.count(s.id) > 0) plan.test.push_back(s.id);
    }
    const bool train_has_fake = std::any_of(plan.train.begin(), plan.train.end(),
                                            [&](const auto& id) { return manifest.find(id).is_fake(); });
    if (!train_has_fake) throw Error("holding out '" + group.name + "' leaves no fake samples for training");
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::pair<std::vector<std::string>, std::vector<std::string>> make_val_test_split(
    const std::vector<std::string>& ids, const std::vector<int>& labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("val-test fraction must be in (0, 1)");
  if (ids.size() != labels.size()) throw Error("val-test split: ids and labels differ in length");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("val-test split: labels must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) throw Error("val-test split: a class is empty");

  std::vector<bool> chosen(ids.size(), false);
  Rng rng(derive_seed(seed, "splits/val_test"));
  for (auto& members : by_class) {
    // round half up; the small epsilon absorbs binary representation error
    const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(members.size()) + 0.5 + 1e-9));
    rng.shuffle(members);
    for (std::size_t i = 0; i < std::min(k, members.size()); ++i) chosen[members[i]] = true;
  }
  std::pair<std::vector<std::string>, std::vector<std::string>> out;
  for (std::size_t i = 0; i < ids.size(); ++i) (chosen[i] ? out.first : out.second).push_back(ids[i]);
  return out;
}

void carve_val_test(SplitPlan& plan, const DatasetManifest& manifest, double fraction, std::uint64_t seed) {
  std::vector<int> labels;
  for (const auto& id : plan.test) labels.push_back(manifest.find(id).label);
  auto [vt, rest] = make_val_test_split(plan.test, labels, fraction, derive_seed(seed, plan.name));
  plan.val_test = std::move(vt);
  plan.test = std::move(rest);
}

void validate_plan(const SplitPlan& plan, const DatasetManifest& manifest) {
  std::set<std::string> seen;
  for (const auto* part : {&plan.train, &plan.val, &plan.test, &plan.val_test}) {
    for (const auto& id : *part) {
      manifest.find(id);
      if (!seen.insert(id).second) throw Error("plan '" + plan.name + "': sample " + id + " appears twice");
    }
  }
  for (const auto* part : {&plan.train, &plan.val}) {
    for (const auto& id : *part) {
      if (manifest.find(id).has_any_tag(plan.held_out_tags))
        throw Error("plan '" + plan.name + "': held-out sample " + id + " in train/val");
    }
  }
}

nlohmann::json to_json(const SplitPlan& plan) {
  return {{"name", plan.name},         {"train", plan.train},       {"val", plan.val},
          {"test", plan.test},         {"val_test", plan.val_test}, {"held_out_tags", plan.held_out_tags}};
}

SplitPlan plan_from_json(const nlohmann::json& j) {
  try {
    SplitPlan p;
    p.name = j.at("name").get<std::string>();
    p.train = j.at("train").get<std::vector<std::string>>();
    p.val = j.at("val").get<std::vector<std::string>>();
    p.test = j.at("test").get<std::vector<std::string>>();
    p.val_test = j.value("val_test", std::vector<std::string>{});
    p.held_out_tags = j.value("held_out_tags", std::set<std::string>{});
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad split plan: ") + e.what());
  }
}

}  // namespace emo
