#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "emo/manifest.hpp"

namespace emo {

/// A frozen low-level detector seen as "sample -> fixed-length feature vector"
/// (its penultimate features). Implementations are immutable.
class FrozenDetector {
 public:
  virtual ~FrozenDetector() = default;
  virtual std::string detector_id() const = 0;
  virtual Eigen::Index feature_dim() const = 0;
  virtual Eigen::VectorXd features(const Sample& sample) const = 0;
  /// Changes whenever the detector's behaviour could change.
  virtual std::uint64_t checksum() const = 0;
};

struct MockDetectorConfig {
  Eigen::Index feature_dim = 256;
  double signal_strength = 0.9;  // rho
  std::set<std::string> blind_tags;
  std::uint64_t seed = 0;
  // Scale of the label direction at rho = 1, and of the per-sample noise.
  double signal_scale = 1.0;
  double noise_scale = 1.0;

  void validate() const;
};

/// features = offset + noise_scale * n(id) + rho * signal_scale * label * u
/// where offset (coordinates in [0.5, 1.5]) and the unit direction u are fixed
/// by the seed and n(id) is standard normal seeded by (seed, id). The label
/// term is dropped for samples carrying a blind tag, which then look real.
class MockDetector final : public FrozenDetector {
 public:
  explicit MockDetector(MockDetectorConfig cfg);

  std::string detector_id() const override { return "mock"; }
  Eigen::Index feature_dim() const override { return cfg_.feature_dim; }
  Eigen::VectorXd features(const Sample& sample) const override;
  std::uint64_t checksum() const override;

  /// The term added for a visible fake.
  Eigen::VectorXd label_component() const;
  const MockDetectorConfig& config() const { return cfg_; }

 private:
  MockDetectorConfig cfg_;
  Eigen::VectorXd offset_;
  Eigen::VectorXd direction_;
};

/// Features exported by an external detector: a JSON index
/// {"detector_id": ..., "feature_dim": d, "features": {sample_id: relative path}}
/// pointing at embedding files with one row of width d.
class SidecarDetector final : public FrozenDetector {
 public:
  explicit SidecarDetector(const std::filesystem::path& index_path);

  std::string detector_id() const override { return id_; }
  Eigen::Index feature_dim() const override { return dim_; }
  Eigen::VectorXd features(const Sample& sample) const override;
  std::uint64_t checksum() const override { return checksum_; }

 private:
  std::string id_;
  Eigen::Index dim_ = 0;
  std::map<std::string, Eigen::VectorXd> rows_;
  std::uint64_t checksum_ = 0;
};

/// Writes index.json plus one feature file per sample under out_dir.
void export_detector_features(const FrozenDetector& detector, const DatasetManifest& manifest,
                              const std::filesystem::path& out_dir);

}  // namespace emo
