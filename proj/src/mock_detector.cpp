#include "emo/mock_detector.hpp"

#include <json.hpp>

#include "emo/embedding.hpp"
#include "emo/error.hpp"
#include "emo/fs_util.hpp"
#include "emo/hash.hpp"
#include "emo/rng.hpp"

namespace emo {

void MockDetectorConfig::validate() const {
  if (feature_dim < 1) throw ConfigError("detector feature_dim must be positive");
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) throw ConfigError("signal_strength must be in [0, 1]");
  if (!(signal_scale >= 0.0) || !(noise_scale >= 0.0)) throw ConfigError("detector scales must be >= 0");
}

MockDetector::MockDetector(MockDetectorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(derive_seed(cfg_.seed, "mock/law"));
  offset_.resize(cfg_.feature_dim);
  for (Eigen::Index k = 0; k < offset_.size(); ++k) offset_(k) = rng.uniform(0.5, 1.5);
  direction_.resize(cfg_.feature_dim);
  for (Eigen::Index k = 0; k < direction_.size(); ++k) direction_(k) = rng.normal();
  direction_.normalize();
}

Eigen::VectorXd MockDetector::label_component() const {
  return cfg_.signal_strength * cfg_.signal_scale * direction_;
}

Eigen::VectorXd MockDetector::features(const Sample& sample) const {
  Rng rng(derive_seed(cfg_.seed, "mock/sample/" + sample.id));
  Eigen::VectorXd f(cfg_.feature_dim);
  for (Eigen::Index k = 0; k < f.size(); ++k) f(k) = offset_(k) + cfg_.noise_scale * rng.normal();
  if (sample.label == 1 && !sample.has_any_tag(cfg_.blind_tags)) f += label_component();
  return f;
}

std::uint64_t MockDetector::checksum() const {
  Fnv1a h;
  h.update("mock");
  h.update_u64(static_cast<std::uint64_t>(cfg_.feature_dim));
  h.update_f64(cfg_.signal_strength);
  h.update_f64(cfg_.signal_scale);
  h.update_f64(cfg_.noise_scale);
  h.update_u64(cfg_.seed);
  for (const auto& t : cfg_.blind_tags) {
    h.update(t);
    h.update_u64(t.size());
  }
  return h.digest();
}

SidecarDetector::SidecarDetector(const std::filesystem::path& index_path) {
  if (!std::filesystem::exists(index_path)) throw ConfigError("detector index not found: " + index_path.string());
  const std::string text = read_file_text(index_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    id_ = j.at("detector_id").get<std::string>();
    dim_ = j.at("feature_dim").get<Eigen::Index>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad detector index " + index_path.string() + ": " + e.what());
  }
  if (dim_ < 1) throw Error("detector index: feature_dim must be positive");
  Fnv1a h;
  h.update(text);
  const auto base = index_path.parent_path();
  for (const auto& [id, rel] : j.at("features").items()) {
    const auto bytes = read_file_bytes(base / rel.get<std::string>());
    h.update(bytes);
    const EmbeddingSequence seq = decode_embedding(bytes, id);
    if (seq.num_frames != 1 || static_cast<Eigen::Index>(seq.dim) != dim_)
      throw Error("detector features for " + id + " must be one row of width " + std::to_string(dim_));
    Eigen::VectorXd v(dim_);
    for (Eigen::Index k = 0; k < dim_; ++k) v(k) = seq.data[static_cast<std::size_t>(k)];
    rows_.emplace(id, std::move(v));
  }
  checksum_ = h.digest();
}

Eigen::VectorXd SidecarDetector::features(const Sample& sample) const {
  const auto it = rows_.find(sample.id);
  if (it == rows_.end()) throw Error("no detector features for sample " + sample.id);
  return it->second;
}

void export_detector_features(const FrozenDetector& detector, const DatasetManifest& manifest,
                              const std::filesystem::path& out_dir) {
  nlohmann::json index{{"detector_id", detector.detector_id()}, {"feature_dim", detector.feature_dim()}};
  nlohmann::json files = nlohmann::json::object();
  for (const Sample& s : manifest.samples) {
    const Eigen::VectorXd f = detector.features(s);
    EmbeddingSequence seq;
    seq.modality = Modality::video;
    seq.num_frames = 1;
    seq.dim = static_cast<std::size_t>(f.size());
    seq.sample_id = s.id;
    for (Eigen::Index k = 0; k < f.size(); ++k) seq.data.push_back(static_cast<float>(f(k)));
    const std::string rel = "features/" + s.id + ".emb";
    write_embedding_file(seq, out_dir / rel);
    files[s.id] = rel;
  }
  index["features"] = std::move(files);
  write_file_atomic(out_dir / "index.json", index.dump(2) + "\n");
}

}  // namespace emo
