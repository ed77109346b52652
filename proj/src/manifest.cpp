#include "emo/manifest.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "emo/embedding.hpp"
#include "emo/error.hpp"
#include "emo/fs_util.hpp"

namespace emo {

namespace fs = std::filesystem;
using nlohmann::json;

bool Sample::has_any_tag(const std::set<std::string>& tags) const {
  return std::any_of(manipulation_tags.begin(), manipulation_tags.end(),
                     [&](const std::string& t) { return tags.count(t) > 0; });
}

fs::path DatasetManifest::resolve(const std::string& p) const {
  fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

const Sample& DatasetManifest::find(const std::string& id) const {
  for (const auto& s : samples) {
    if (s.id == id) return s;
  }
  throw Error("unknown sample id: " + id);
}

void validate(const Sample& s) {
  if (s.id.empty()) throw Error("sample with empty id");
  if (s.label != 0 && s.label != 1) throw Error("sample " + s.id + ": label must be 0 or 1");
  if (s.label != static_cast<int>(s.video_fake || s.audio_fake)) {
    throw Error("sample " + s.id + ": label != (video_fake OR audio_fake)");
  }
  if (s.label == 0 && !s.manipulation_tags.empty()) {
    throw Error("sample " + s.id + ": real sample carries manipulation tags");
  }
  if (s.label == 1 && s.manipulation_tags.empty()) {
    throw Error("sample " + s.id + ": fake sample without manipulation tags");
  }
}

void validate(const DatasetManifest& m, bool check_files) {
  std::unordered_set<std::string> seen;
  for (const auto& s : m.samples) {
    validate(s);
    if (!seen.insert(s.id).second) throw Error("duplicate sample id: " + s.id);
    if (check_files) {
      for (const auto& p : {s.video_path, s.audio_path}) {
        const fs::path path = m.resolve(p);
        if (!fs::exists(path)) throw Error("missing embedding file: " + path.string());
        (void)read_embedding_header(path);
      }
    }
  }
}

json to_json(const Sample& s) {
  return json{{"id", s.id},
              {"label", s.label},
              {"video_fake", s.video_fake},
              {"audio_fake", s.audio_fake},
              {"manipulation_tags", s.manipulation_tags},
              {"group_key", s.group_key},
              {"video_path", s.video_path},
              {"audio_path", s.audio_path}};
}

Sample sample_from_json(const json& j) {
  Sample s;
  try {
    s.id = j.at("id").get<std::string>();
    s.label = j.at("label").get<int>();
    s.video_fake = j.at("video_fake").get<bool>();
    s.audio_fake = j.at("audio_fake").get<bool>();
    s.manipulation_tags = j.at("manipulation_tags").get<std::set<std::string>>();
    s.group_key = j.at("group_key").get<std::string>();
    s.video_path = j.at("video_path").get<std::string>();
    s.audio_path = j.at("audio_path").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed sample record: ") + e.what());
  }
  return s;
}

json to_json(const DatasetManifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples) samples.push_back(to_json(s));
  return json{{"format_version", m.format_version}, {"metadata", m.metadata}, {"samples", samples}};
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (j.contains("metadata")) m.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    for (const auto& s : j.at("samples")) m.samples.push_back(sample_from_json(s));
  } catch (const json::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
  if (m.format_version != kManifestFormatVersion) throw Error("unsupported manifest format_version");
  return m;
}

std::string dump_manifest(const DatasetManifest& m) { return to_json(m).dump(2) + "\n"; }

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  validate(m, false);
  write_file_atomic(path, dump_manifest(m));
}

DatasetManifest load_manifest(const fs::path& path, bool check_files) {
  json j;
  try {
    j = json::parse(read_file_text(path));
  } catch (const json::parse_error& e) {
    throw Error("manifest is not valid JSON: " + path.string());
  }
  DatasetManifest m = manifest_from_json(j);
  m.base_dir = path.parent_path();
  validate(m, check_files);
  return m;
}

DatasetManifest subset(const DatasetManifest& m, const std::vector<std::string>& ids) {
  std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  DatasetManifest out;
  out.format_version = m.format_version;
  out.metadata = m.metadata;
  out.base_dir = m.base_dir;
  for (const auto& s : m.samples) {
    if (wanted.erase(s.id) > 0) out.samples.push_back(s);
  }
  if (!wanted.empty()) throw Error("unknown sample id: " + *wanted.begin());
  return out;
}

}  // namespace emo
