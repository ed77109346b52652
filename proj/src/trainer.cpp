#include "emo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emo/error.hpp"
#include "emo/metrics.hpp"
#include "emo/optim.hpp"

namespace emo {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(optimizer_epsilon > 0.0)) throw ConfigError("optimizer_epsilon must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (scheduler_patience < 0) throw ConfigError("scheduler_patience must be >= 0");
  if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0)) throw ConfigError("scheduler_factor must be in (0, 1)");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
  if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  model_options().validate();
}

ModelOptions TrainConfig::model_options() const {
  ModelOptions o;
  o.encoder = encoder;
  o.encoder.dropout_rate = dropout;
  o.audio_input_dim = audio_input_dim;
  o.fusion = fusion_strategy;
  o.modality = modality;
  o.use_temporal_transformers = !disable_temporal_transformers;
  return o;
}

LossOptions TrainConfig::loss_options() const { return {alpha, margin, !disable_contrastive}; }

nlohmann::json history_to_json(const std::vector<EpochRecord>& history) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : history) {
    nlohmann::json j{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"lr", r.lr}};
    j["val_auc"] = r.val_auc ? nlohmann::json(*r.val_auc) : nlohmann::json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

namespace {

std::vector<const SampleData*> slice(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<const SampleData*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&data[i]);
  return out;
}

struct EvalPass {
  double loss = 0.0;
  std::vector<double> logits;
};

EvalPass eval_pass(const EmoForensicsModel& model, const Dataset& data, const TrainConfig& cfg) {
  Rng pair_rng(derive_seed(cfg.seed, "emoforensics/val_pairs"));
  const LossOptions lo = cfg.loss_options();
  EvalPass res;
  double weighted = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += cfg.batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + cfg.batch_size); ++i) idx.push_back(i);
    const auto batch = slice(data, idx);
    ad::Tape tape;
    ParamBinding binding(tape, model.params, false);
    BatchOutput out;
    const ad::Var loss = emoforensics_loss(binding, model.options, batch, lo, EncoderContext{}, pair_rng, nullptr, &out);
    weighted += loss.value()(0, 0) * static_cast<double>(batch.size());
    const auto l = overall_logits(model.options, out);
    res.logits.insert(res.logits.end(), l.begin(), l.end());
  }
  res.loss = weighted / static_cast<double>(data.size());
  return res;
}

void check_train_data(const Dataset& train, const Dataset& val) {
  std::size_t fakes = 0;
  for (const auto& s : train) fakes += static_cast<std::size_t>(s.sample.label);
  if (fakes == 0 || fakes == train.size()) throw Error("training set needs at least one real and one fake sample");
  if (val.empty()) throw Error("validation set is empty");
}

}  // namespace

double evaluate_loss(const EmoForensicsModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw Error("evaluate_loss: empty dataset");
  return eval_pass(model, data, cfg).loss;
}

TrainResult train_emoforensics(const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                               const EpochCallback& on_epoch) {
  cfg.validate();
  check_train_data(train, val);

  TrainResult result{init_emoforensics(cfg.model_options(), cfg.seed), {}, 0};
  EmoForensicsModel model = result.model;
  const LossOptions lo = cfg.loss_options();

  Rng rng(derive_seed(cfg.seed, "emoforensics/train"));
  AdamW opt(cfg.learning_rate, cfg.weight_decay, cfg.optimizer_epsilon);
  ReduceLROnPlateau sched(cfg.scheduler_patience, cfg.scheduler_factor);
  EarlyStopping stopper(cfg.early_stop_patience);

  std::vector<int> val_labels;
  for (const auto& s : val) val_labels.push_back(s.sample.label);
  const bool val_has_both = std::count(val_labels.begin(), val_labels.end(), 1) > 0 &&
                            std::count(val_labels.begin(), val_labels.end(), 0) > 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double lr = cfg.learning_rate;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    opt.set_learning_rate(lr);
    rng.shuffle(order);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto batch = slice(train, std::span(order).subspan(start, end - start));
      ad::Tape tape;
      ParamBinding binding(tape, model.params, true);
      const EncoderContext ctx{true, model.options.encoder.dropout_rate, &rng, nullptr};
      const ad::Var loss = emoforensics_loss(binding, model.options, batch, lo, ctx, rng);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) throw Error("non-finite training loss at epoch " + std::to_string(epoch));
      tape.backward(loss);
      const ParamStore grads = binding.gradients();
      opt.step(model.params, grads);
      weighted += value * static_cast<double>(batch.size());
    }

    const EvalPass ev = eval_pass(model, val, cfg);
    if (!std::isfinite(ev.loss)) throw Error("non-finite validation loss at epoch " + std::to_string(epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = weighted / static_cast<double>(train.size());
    rec.val_loss = ev.loss;
    rec.lr = lr;
    if (val_has_both) rec.val_auc = roc_auc(ev.logits, val_labels);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (stopper.update(ev.loss)) {
      result.model = model;
      result.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
    lr = sched.step(ev.loss, lr);
  }
  return result;
}

TrainResult train_emoforensics(const DatasetManifest& train, const DatasetManifest& val, const TrainConfig& cfg,
                               const EpochCallback& on_epoch) {
  const LoadOptions lo = load_options_for(cfg.model_options());
  return train_emoforensics(load_dataset(train, lo), load_dataset(val, lo), cfg, on_epoch);
}

}  // namespace emo
