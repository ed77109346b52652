#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "emo/dataset.hpp"
#include "emo/emoforensics.hpp"

namespace emo {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.05;
  double optimizer_epsilon = 1e-8;
  double dropout = 0.15;
  int max_epochs = 100;
  int scheduler_patience = 4;
  double scheduler_factor = 0.5;
  int early_stop_patience = 50;
  double alpha = 0.5;
  double margin = 1.0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  FusionStrategy fusion_strategy = FusionStrategy::add;
  bool disable_contrastive = false;
  bool disable_temporal_transformers = false;
  ModalityMode modality = ModalityMode::both;

  // Encoder shape; dropout above overrides encoder.dropout_rate.
  TransformerConfig encoder;
  int audio_input_dim = 1024;

  void validate() const;
  ModelOptions model_options() const;
  LossOptions loss_options() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  std::optional<double> val_auc;  // absent when val holds a single class
};

struct TrainResult {
  EmoForensicsModel model;  // best-validation parameters
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

nlohmann::json history_to_json(const std::vector<EpochRecord>& history);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch AdamW on the combined loss. Data order, dropout masks and
/// negative-pair draws come from one stream seeded by cfg.seed.
TrainResult train_emoforensics(const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {});

TrainResult train_emoforensics(const DatasetManifest& train, const DatasetManifest& val, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {});

/// Mean combined loss over data in evaluation mode, with a fixed pair stream.
double evaluate_loss(const EmoForensicsModel& model, const Dataset& data, const TrainConfig& cfg);

}  // namespace emo
