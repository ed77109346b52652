#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace emo {

/// One labeled clip. label is 1 for fake, 0 for real.
struct Sample {
  std::string id;
  int label = 0;
  bool video_fake = false;
  bool audio_fake = false;
  std::set<std::string> manipulation_tags;
  std::string group_key;
  std::string video_path;
  std::string audio_path;

  bool is_fake() const { return label == 1; }
  bool has_any_tag(const std::set<std::string>& tags) const;
};

/// Ordered sample list plus free-form metadata. Relative sample paths are
/// resolved against base_dir, which is not serialized.
struct DatasetManifest {
  std::vector<Sample> samples;
  int format_version = 1;
  std::map<std::string, std::string> metadata;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const;
  const Sample& find(const std::string& id) const;
};

inline constexpr int kManifestFormatVersion = 1;

void validate(const Sample& s);

/// Checks per-sample invariants and id uniqueness. With check_files, every
/// referenced embedding file must exist and parse.
void validate(const DatasetManifest& m, bool check_files);

nlohmann::json to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

std::string dump_manifest(const DatasetManifest& m);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);

/// Samples whose id is in ids, in manifest order. Unknown ids throw.
DatasetManifest subset(const DatasetManifest& m, const std::vector<std::string>& ids);

}  // namespace emo
