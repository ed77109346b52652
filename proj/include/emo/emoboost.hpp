#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emo/autodiff.hpp"
#include "emo/dataset.hpp"
#include "emo/emoforensics.hpp"
#include "emo/mock_detector.hpp"
#include "emo/params.hpp"

namespace emo {

enum class LateFusion { product, add, concat };

std::string_view to_string(LateFusion f);
LateFusion parse_late_fusion(std::string_view s);

struct EmoBoostConfig {
  LateFusion fusion = LateFusion::product;
  int projection_layers = 2;  // affine layers; GELU between consecutive ones
  double learning_rate = 1e-3;
  double weight_decay = 0.05;
  double optimizer_epsilon = 1e-8;
  int max_epochs = 20;
  int early_stop_patience = 8;
  int scheduler_patience = 4;
  double scheduler_factor = 0.5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Frozen inputs of the fusion stage: one row per sample.
struct FeatureSet {
  std::vector<std::string> ids;
  ad::Matrix joint;     // N x joint_dim, EmoForensics joint representation
  ad::Matrix detector;  // N x d_D
  std::vector<int> labels;
  std::vector<double> emo_logits;  // EmoForensics score per sample

  std::size_t size() const { return ids.size(); }
};

FeatureSet extract_features(const EmoForensicsModel& emo, const FrozenDetector& detector, const Dataset& data);
FeatureSet select_rows(const FeatureSet& set, const std::vector<std::size_t>& rows);

/// Trainable part: projection "proj.fc<i>.{weight,bias}" (joint_dim -> d_D,
/// hidden width d_D) and the single-layer head "head.{weight,bias}".
struct EmoBoostHeads {
  LateFusion fusion = LateFusion::product;
  int projection_layers = 2;
  Eigen::Index joint_dim = 0;
  Eigen::Index detector_dim = 0;
  ParamStore params;
};

EmoBoostHeads init_emoboost(Eigen::Index joint_dim, Eigen::Index detector_dim, const EmoBoostConfig& cfg);

ParamStore heads_checkpoint(const EmoBoostHeads& heads);
EmoBoostHeads heads_from_checkpoint(const ParamStore& ckpt);
void save_heads(const EmoBoostHeads& heads, const std::filesystem::path& path);
EmoBoostHeads load_heads(const std::filesystem::path& path);

/// Affine layers with GELU between them, linear output.
ad::Var project_emotion(const ParamBinding& p, int layers, ad::Var f_e);
Eigen::VectorXd project_emotion(const EmoBoostHeads& heads, const Eigen::VectorXd& f_e);

ad::Var fuse_late(ad::Var projected, ad::Var detector, LateFusion fusion);
Eigen::VectorXd fuse_late(const Eigen::VectorXd& projected, const Eigen::VectorXd& detector, LateFusion fusion);

/// B x 1 logits. The detector rows enter as constants.
ad::Var emoboost_logits(const ParamBinding& p, const EmoBoostHeads& heads, ad::Var joint, ad::Var detector);

/// Mean BCE of the fused prediction.
ad::Var emoboost_loss(const ParamBinding& p, const EmoBoostHeads& heads, ad::Var joint, ad::Var detector,
                      std::span<const double> labels);

std::vector<double> emoboost_predict(const EmoBoostHeads& heads, const FeatureSet& set);

struct BoostEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  std::optional<double> val_auc;
};

struct EmoBoostResult {
  EmoBoostHeads heads;
  std::vector<BoostEpoch> history;
  int best_epoch = 0;
};

nlohmann::json history_to_json(const std::vector<BoostEpoch>& history);

/// Trains only the projection and head; the feature sets are never modified.
EmoBoostResult train_emoboost(const FeatureSet& train, const FeatureSet& val, const EmoBoostConfig& cfg);

/// Extracts features from the frozen models first. Their checksums are
/// compared before and after; a change throws.
EmoBoostResult train_emoboost(const Dataset& train, const Dataset& val, const EmoForensicsModel& emo,
                              const FrozenDetector& detector, const EmoBoostConfig& cfg);

/// Standardized L2-regularized logistic regression, used to score a detector
/// on its own features.
struct LinearProbe {
  Eigen::VectorXd mean, scale, weight;
  double bias = 0.0;

  std::vector<double> score(const ad::Matrix& x) const;
};

LinearProbe train_linear_probe(const ad::Matrix& x, std::span<const int> labels, double l2 = 1e-3, int iterations = 500);

}  // namespace emo
