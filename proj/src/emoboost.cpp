#include "emo/emoboost.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emo/error.hpp"
#include "emo/losses.hpp"
#include "emo/metrics.hpp"
#include "emo/optim.hpp"
#include "emo/transformer.hpp"

namespace emo {

std::string_view to_string(LateFusion f) {
  switch (f) {
    case LateFusion::product: return "product";
    case LateFusion::add: return "add";
    case LateFusion::concat: return "concat";
  }
  return "?";
}

LateFusion parse_late_fusion(std::string_view s) {
  if (s == "product") return LateFusion::product;
  if (s == "add") return LateFusion::add;
  if (s == "concat") return LateFusion::concat;
  throw ConfigError("unknown late fusion strategy: " + std::string(s));
}

void EmoBoostConfig::validate() const {
  if (projection_layers < 1) throw ConfigError("projection_layers must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(optimizer_epsilon > 0.0)) throw ConfigError("optimizer_epsilon must be > 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
  if (scheduler_patience < 0) throw ConfigError("scheduler_patience must be >= 0");
  if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0)) throw ConfigError("scheduler_factor must be in (0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

FeatureSet extract_features(const EmoForensicsModel& emo, const FrozenDetector& detector, const Dataset& data) {
  FeatureSet set;
  const auto preds = predict(emo, data);
  const Eigen::Index jd = emo.options.joint_dim();
  set.joint.resize(static_cast<Eigen::Index>(data.size()), jd);
  set.detector.resize(static_cast<Eigen::Index>(data.size()), detector.feature_dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    set.ids.push_back(data[i].sample.id);
    set.labels.push_back(data[i].sample.label);
    set.emo_logits.push_back(preds[i].logit);
    set.joint.row(r) = preds[i].joint_repr.transpose();
    const Eigen::VectorXd f = detector.features(data[i].sample);
    if (f.size() != detector.feature_dim()) throw Error("detector returned a vector of the wrong length");
    set.detector.row(r) = f.transpose();
  }
  return set;
}

FeatureSet select_rows(const FeatureSet& set, const std::vector<std::size_t>& rows) {
  FeatureSet out;
  out.joint.resize(static_cast<Eigen::Index>(rows.size()), set.joint.cols());
  out.detector.resize(static_cast<Eigen::Index>(rows.size()), set.detector.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= set.size()) throw Error("select_rows: row out of range");
    out.ids.push_back(set.ids[r]);
    out.labels.push_back(set.labels[r]);
    out.emo_logits.push_back(set.emo_logits[r]);
    out.joint.row(static_cast<Eigen::Index>(i)) = set.joint.row(static_cast<Eigen::Index>(r));
    out.detector.row(static_cast<Eigen::Index>(i)) = set.detector.row(static_cast<Eigen::Index>(r));
  }
  return out;
}

namespace {

std::string fc_name(int i) { return "proj.fc" + std::to_string(i); }

Eigen::Index fused_width(LateFusion f, Eigen::Index d) { return f == LateFusion::concat ? 2 * d : d; }

}  // namespace

EmoBoostHeads init_emoboost(Eigen::Index joint_dim, Eigen::Index detector_dim, const EmoBoostConfig& cfg) {
  cfg.validate();
  if (joint_dim < 1 || detector_dim < 1) throw Error("init_emoboost: dimensions must be positive");
  EmoBoostHeads h{cfg.fusion, cfg.projection_layers, joint_dim, detector_dim, {}};
  Rng rng(derive_seed(cfg.seed, "emoboost/init"));
  for (int i = 0; i < cfg.projection_layers; ++i) {
    init_linear(h.params, fc_name(i), i == 0 ? joint_dim : detector_dim, detector_dim, rng);
  }
  init_linear(h.params, "head", fused_width(cfg.fusion, detector_dim), 1, rng);
  return h;
}

ParamStore heads_checkpoint(const EmoBoostHeads& heads) {
  ParamStore out;
  out.add("meta.fusion", scalar_tensor(static_cast<int>(heads.fusion)));
  out.add("meta.projection_layers", scalar_tensor(heads.projection_layers));
  out.add("meta.joint_dim", scalar_tensor(static_cast<double>(heads.joint_dim)));
  out.add("meta.detector_dim", scalar_tensor(static_cast<double>(heads.detector_dim)));
  for (const auto& name : heads.params.names()) out.add(name, heads.params.at(name));
  return out;
}

EmoBoostHeads heads_from_checkpoint(const ParamStore& ckpt) {
  auto get = [&](const std::string& key) {
    const std::string name = "meta." + key;
    if (!ckpt.contains(name) || ckpt.at(name).size() != 1) throw Error("fusion checkpoint missing " + name);
    return static_cast<long>(std::lround(ckpt.at(name)(0, 0)));
  };
  EmoBoostConfig cfg;
  const long fusion = get("fusion");
  if (fusion < 0 || fusion > 2) throw Error("fusion checkpoint has unknown fusion strategy");
  cfg.fusion = static_cast<LateFusion>(fusion);
  cfg.projection_layers = static_cast<int>(get("projection_layers"));
  EmoBoostHeads h = init_emoboost(get("joint_dim"), get("detector_dim"), cfg);
  for (const auto& name : h.params.names()) {
    if (!ckpt.contains(name)) throw Error("fusion checkpoint missing tensor " + name);
    const ad::Matrix& src = ckpt.at(name);
    ad::Matrix& dst = h.params.at(name);
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) throw Error("fusion checkpoint tensor has wrong shape: " + name);
    dst = src;
  }
  return h;
}

void save_heads(const EmoBoostHeads& heads, const std::filesystem::path& path) {
  save_checkpoint(heads_checkpoint(heads), path);
}

EmoBoostHeads load_heads(const std::filesystem::path& path) { return heads_from_checkpoint(load_checkpoint(path)); }

ad::Var project_emotion(const ParamBinding& p, int layers, ad::Var f_e) {
  ad::Var h = f_e;
  for (int i = 0; i < layers; ++i) {
    if (i > 0) h = ad::gelu(h);
    h = linear(p, fc_name(i), h);
  }
  return h;
}

Eigen::VectorXd project_emotion(const EmoBoostHeads& heads, const Eigen::VectorXd& f_e) {
  if (f_e.size() != heads.joint_dim) throw Error("project_emotion: width mismatch");
  ad::Tape tape;
  ParamBinding binding(tape, heads.params, false);
  const ad::Var out = project_emotion(binding, heads.projection_layers, tape.constant(f_e.transpose()));
  return out.value().row(0).transpose();
}

ad::Var fuse_late(ad::Var projected, ad::Var detector, LateFusion fusion) {
  if (projected.cols() != detector.cols() || projected.rows() != detector.rows())
    throw Error("fuse_late: length mismatch");
  switch (fusion) {
    case LateFusion::product: return ad::mul(projected, detector);
    case LateFusion::add: return ad::add(projected, detector);
    case LateFusion::concat: return ad::concat_cols(projected, detector);
  }
  throw Error("fuse_late: unknown strategy");
}

Eigen::VectorXd fuse_late(const Eigen::VectorXd& projected, const Eigen::VectorXd& detector, LateFusion fusion) {
  if (projected.size() != detector.size()) throw Error("fuse_late: length mismatch");
  switch (fusion) {
    case LateFusion::product: return projected.cwiseProduct(detector);
    case LateFusion::add: return projected + detector;
    case LateFusion::concat: {
      Eigen::VectorXd out(projected.size() + detector.size());
      out << projected, detector;
      return out;
    }
  }
  throw Error("fuse_late: unknown strategy");
}

ad::Var emoboost_logits(const ParamBinding& p, const EmoBoostHeads& heads, ad::Var joint, ad::Var detector) {
  if (joint.cols() != heads.joint_dim) throw Error("emoboost: joint representation width mismatch");
  if (detector.cols() != heads.detector_dim) throw Error("emoboost: detector feature width mismatch");
  const ad::Var projected = project_emotion(p, heads.projection_layers, joint);
  return linear(p, "head", fuse_late(projected, detector, heads.fusion));
}

ad::Var emoboost_loss(const ParamBinding& p, const EmoBoostHeads& heads, ad::Var joint, ad::Var detector,
                      std::span<const double> labels) {
  return ad::bce_with_logits(emoboost_logits(p, heads, joint, detector), labels);
}

std::vector<double> emoboost_predict(const EmoBoostHeads& heads, const FeatureSet& set) {
  if (set.size() == 0) return {};
  ad::Tape tape;
  ParamBinding binding(tape, heads.params, false);
  const ad::Var logits = emoboost_logits(binding, heads, tape.constant_ref(set.joint), tape.constant_ref(set.detector));
  std::vector<double> out(set.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits.value()(static_cast<Eigen::Index>(i), 0);
  return out;
}

nlohmann::json history_to_json(const std::vector<BoostEpoch>& history) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : history) {
    nlohmann::json j{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"lr", r.lr}};
    j["val_auc"] = r.val_auc ? nlohmann::json(*r.val_auc) : nlohmann::json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

namespace {

std::vector<double> as_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

double mean_loss(const EmoBoostHeads& heads, const FeatureSet& set) {
  ad::Tape tape;
  ParamBinding binding(tape, heads.params, false);
  const auto y = as_double(set.labels);
  return emoboost_loss(binding, heads, tape.constant_ref(set.joint), tape.constant_ref(set.detector), y).value()(0, 0);
}

bool both_classes(const std::vector<int>& labels) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  return pos > 0 && pos < static_cast<long>(labels.size());
}

}  // namespace

EmoBoostResult train_emoboost(const FeatureSet& train, const FeatureSet& val, const EmoBoostConfig& cfg) {
  cfg.validate();
  if (train.size() == 0 || val.size() == 0) throw Error("emoboost: empty train or validation features");
  if (!both_classes(train.labels)) throw Error("emoboost: training set needs both classes");
  if (train.joint.cols() != val.joint.cols() || train.detector.cols() != val.detector.cols())
    throw Error("emoboost: train and validation feature widths differ");

  EmoBoostResult result{init_emoboost(train.joint.cols(), train.detector.cols(), cfg), {}, 0};
  EmoBoostHeads heads = result.heads;
  Rng rng(derive_seed(cfg.seed, "emoboost/train"));
  AdamW opt(cfg.learning_rate, cfg.weight_decay, cfg.optimizer_epsilon);
  ReduceLROnPlateau sched(cfg.scheduler_patience, cfg.scheduler_factor);
  EarlyStopping stopper(cfg.early_stop_patience);
  const bool val_auc = both_classes(val.labels);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double lr = cfg.learning_rate;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    opt.set_learning_rate(lr);
    rng.shuffle(order);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const FeatureSet batch = select_rows(train, {order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end)});
      ad::Tape tape;
      ParamBinding binding(tape, heads.params, true);
      const auto y = as_double(batch.labels);
      const ad::Var loss =
          emoboost_loss(binding, heads, tape.constant_ref(batch.joint), tape.constant_ref(batch.detector), y);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) throw Error("non-finite fusion loss at epoch " + std::to_string(epoch));
      tape.backward(loss);
      opt.step(heads.params, binding.gradients());
      weighted += value * static_cast<double>(batch.size());
    }
    BoostEpoch rec;
    rec.epoch = epoch;
    rec.train_loss = weighted / static_cast<double>(train.size());
    rec.val_loss = mean_loss(heads, val);
    rec.lr = lr;
    if (val_auc) rec.val_auc = roc_auc(emoboost_predict(heads, val), val.labels);
    result.history.push_back(rec);
    if (stopper.update(rec.val_loss)) {
      result.heads = heads;
      result.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
    lr = sched.step(rec.val_loss, lr);
  }
  return result;
}

EmoBoostResult train_emoboost(const Dataset& train, const Dataset& val, const EmoForensicsModel& emo,
                              const FrozenDetector& detector, const EmoBoostConfig& cfg) {
  const std::uint64_t emo_before = emo.params.checksum();
  const std::uint64_t det_before = detector.checksum();
  const FeatureSet tr = extract_features(emo, detector, train);
  const FeatureSet va = extract_features(emo, detector, val);
  EmoBoostResult r = train_emoboost(tr, va, cfg);
  if (emo.params.checksum() != emo_before || detector.checksum() != det_before)
    throw Error("frozen component changed during fusion training");
  return r;
}

std::vector<double> LinearProbe::score(const ad::Matrix& x) const {
  if (x.cols() != weight.size()) throw Error("linear probe: width mismatch");
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd z = (x.row(i).transpose() - mean).cwiseQuotient(scale);
    out[static_cast<std::size_t>(i)] = z.dot(weight) + bias;
  }
  return out;
}

LinearProbe train_linear_probe(const ad::Matrix& x, std::span<const int> labels, double l2, int iterations) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size()) throw Error("linear probe: bad training data");
  LinearProbe probe;
  probe.mean = x.colwise().mean().transpose();
  ad::Matrix z = x.rowwise() - probe.mean.transpose();
  probe.scale = (z.array().square().colwise().sum() / static_cast<double>(n)).sqrt().transpose();
  for (Eigen::Index k = 0; k < d; ++k) {
    if (probe.scale(k) < 1e-12) probe.scale(k) = 1.0;
  }
  z = z.array().rowwise() / probe.scale.transpose().array();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)];

  // Full-batch gradient descent; the standardized problem is well conditioned.
  probe.weight = Eigen::VectorXd::Zero(d);
  const double step = 0.5;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd r = z * probe.weight;
    for (Eigen::Index i = 0; i < n; ++i) r(i) = sigmoid(r(i) + probe.bias) - y(i);
    const Eigen::VectorXd g = z.transpose() * r / static_cast<double>(n) + l2 * probe.weight;
    probe.weight -= step * g;
    probe.bias -= step * r.mean();
  }
  return probe;
}

}  // namespace emo
