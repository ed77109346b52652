#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "emo/manifest.hpp"

namespace emo {

struct SplitPlan {
  std::string name;
  std::vector<std::string> train, val, test, val_test;
  std::set<std::string> held_out_tags;

  /// Test ids with the val-test part added back, as used for reporting.
  std::vector<std::string> reporting_test() const;
  bool operator==(const SplitPlan&) const = default;
};

struct SplitRatios {
  double train = 0.6;
  double val = 0.1;
  double test = 0.3;
};

/// Whole groups (by group_key) are shuffled and dealt to train/val/test with
/// group counts rounded by largest remainder. Parts with a positive ratio get
/// at least one group.
SplitPlan make_in_domain_split(const DatasetManifest& manifest, SplitRatios ratios, std::uint64_t seed);

struct TagGroup {
  std::string name;
  std::set<std::string> tags;
};

/// Per tag group, starting from the in-domain plan `base`: train and val drop
/// every sample carrying a held-out tag; test holds every held-out fake of the
/// manifest plus the reals of base.test. Fakes of other tags in base.test
/// belong to no part of the plan.
std::vector<SplitPlan> make_leave_one_out_splits(const DatasetManifest& manifest, const std::vector<TagGroup>& groups,
                                                 const SplitPlan& base);

/// Samples round-half-up(fraction * class size) ids per class. Returns
/// (val_test, remaining), both in input order.
std::pair<std::vector<std::string>, std::vector<std::string>> make_val_test_split(
    const std::vector<std::string>& ids, const std::vector<int>& labels, double fraction, std::uint64_t seed);

/// Moves a per-class fraction of plan.test into plan.val_test.
void carve_val_test(SplitPlan& plan, const DatasetManifest& manifest, double fraction, std::uint64_t seed);

/// Ids exist, parts are pairwise disjoint, and train/val carry no held-out tag.
void validate_plan(const SplitPlan& plan, const DatasetManifest& manifest);

nlohmann::json to_json(const SplitPlan& plan);
SplitPlan plan_from_json(const nlohmann::json& j);

}  // namespace emo
