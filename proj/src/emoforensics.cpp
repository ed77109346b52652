#include "emo/emoforensics.hpp"

#include <cmath>

#include "emo/error.hpp"
#include "emo/losses.hpp"

namespace emo {

std::string_view to_string(FusionStrategy f) {
  switch (f) {
    case FusionStrategy::add: return "add";
    case FusionStrategy::concat: return "concat";
    case FusionStrategy::product: return "product";
  }
  return "?";
}

std::string_view to_string(ModalityMode m) {
  switch (m) {
    case ModalityMode::both: return "both";
    case ModalityMode::video_only: return "video_only";
    case ModalityMode::audio_only: return "audio_only";
  }
  return "?";
}

FusionStrategy parse_fusion(std::string_view s) {
  if (s == "add") return FusionStrategy::add;
  if (s == "concat") return FusionStrategy::concat;
  if (s == "product") return FusionStrategy::product;
  throw ConfigError("unknown fusion strategy: " + std::string(s));
}

ModalityMode parse_modality(std::string_view s) {
  if (s == "both") return ModalityMode::both;
  if (s == "video_only") return ModalityMode::video_only;
  if (s == "audio_only") return ModalityMode::audio_only;
  throw ConfigError("unknown modality mode: " + std::string(s));
}

Eigen::Index ModelOptions::joint_dim() const {
  const Eigen::Index d = encoder.model_dim;
  return fusion == FusionStrategy::concat && modality == ModalityMode::both ? 2 * d : d;
}

void ModelOptions::validate() const {
  encoder.validate();
  if (audio_input_dim < 1) throw ConfigError("audio_input_dim must be positive");
}

EmoForensicsModel init_emoforensics(const ModelOptions& options, std::uint64_t seed) {
  options.validate();
  EmoForensicsModel model{options, {}};
  Rng rng(derive_seed(seed, "emoforensics/init"));
  const Eigen::Index d = options.encoder.model_dim;
  if (options.uses_video() && options.use_temporal_transformers)
    init_temporal_encoder(model.params, "video.", options.encoder, rng);
  if (options.uses_audio()) {
    init_linear(model.params, "audio_proj", options.audio_input_dim, d, rng);
    if (options.use_temporal_transformers) init_temporal_encoder(model.params, "audio.", options.encoder, rng);
  }
  if (options.separate_heads()) {
    if (options.uses_video()) init_linear(model.params, "head_video", d, 1, rng);
    if (options.uses_audio()) init_linear(model.params, "head_audio", d, 1, rng);
  } else {
    init_linear(model.params, "head", options.joint_dim(), 1, rng);
  }
  return model;
}

ParamStore model_checkpoint(const EmoForensicsModel& model) {
  ParamStore out;
  const ModelOptions& o = model.options;
  out.add("meta.depth", scalar_tensor(o.encoder.depth));
  out.add("meta.model_dim", scalar_tensor(o.encoder.model_dim));
  out.add("meta.num_heads", scalar_tensor(o.encoder.num_heads));
  out.add("meta.ffn_multiplier", scalar_tensor(o.encoder.ffn_multiplier));
  out.add("meta.dropout_rate", scalar_tensor(o.encoder.dropout_rate));
  out.add("meta.max_seq_len", scalar_tensor(o.encoder.max_seq_len));
  out.add("meta.use_positional", scalar_tensor(o.encoder.use_positional ? 1 : 0));
  out.add("meta.audio_input_dim", scalar_tensor(o.audio_input_dim));
  out.add("meta.fusion", scalar_tensor(static_cast<int>(o.fusion)));
  out.add("meta.modality", scalar_tensor(static_cast<int>(o.modality)));
  out.add("meta.use_temporal_transformers", scalar_tensor(o.use_temporal_transformers ? 1 : 0));
  for (const auto& name : model.params.names()) out.add(name, model.params.at(name));
  return out;
}

namespace {

double meta(const ParamStore& ckpt, const std::string& key) {
  const std::string name = "meta." + key;
  if (!ckpt.contains(name)) throw Error("checkpoint missing " + name);
  const ad::Matrix& m = ckpt.at(name);
  if (m.size() != 1) throw Error("checkpoint field " + name + " is not a scalar");
  return m(0, 0);
}

int meta_int(const ParamStore& ckpt, const std::string& key) { return static_cast<int>(std::lround(meta(ckpt, key))); }

}  // namespace

EmoForensicsModel model_from_checkpoint(const ParamStore& ckpt) {
  ModelOptions o;
  o.encoder.depth = meta_int(ckpt, "depth");
  o.encoder.model_dim = meta_int(ckpt, "model_dim");
  o.encoder.num_heads = meta_int(ckpt, "num_heads");
  o.encoder.ffn_multiplier = meta_int(ckpt, "ffn_multiplier");
  o.encoder.dropout_rate = meta(ckpt, "dropout_rate");
  o.encoder.max_seq_len = meta_int(ckpt, "max_seq_len");
  o.encoder.use_positional = meta_int(ckpt, "use_positional") != 0;
  o.audio_input_dim = meta_int(ckpt, "audio_input_dim");
  const int fusion = meta_int(ckpt, "fusion"), modality = meta_int(ckpt, "modality");
  if (fusion < 0 || fusion > 2 || modality < 0 || modality > 2) throw Error("checkpoint has unknown fusion or modality");
  o.fusion = static_cast<FusionStrategy>(fusion);
  o.modality = static_cast<ModalityMode>(modality);
  o.use_temporal_transformers = meta_int(ckpt, "use_temporal_transformers") != 0;
  o.validate();

  // Shapes must match a freshly initialized model of the same options.
  EmoForensicsModel model = init_emoforensics(o, 0);
  for (const auto& name : model.params.names()) {
    if (!ckpt.contains(name)) throw Error("checkpoint missing tensor " + name);
    const ad::Matrix& src = ckpt.at(name);
    ad::Matrix& dst = model.params.at(name);
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) throw Error("checkpoint tensor has wrong shape: " + name);
    dst = src;
  }
  return model;
}

void save_model(const EmoForensicsModel& model, const std::filesystem::path& path) {
  save_checkpoint(model_checkpoint(model), path);
}

EmoForensicsModel load_model(const std::filesystem::path& path) { return model_from_checkpoint(load_checkpoint(path)); }

Eigen::VectorXd fuse_modalities(const Eigen::VectorXd& h_v, const Eigen::VectorXd& h_a, FusionStrategy strategy) {
  if (h_v.size() != h_a.size()) throw Error("fuse_modalities: length mismatch");
  switch (strategy) {
    case FusionStrategy::add: return h_v + h_a;
    case FusionStrategy::product: return h_v.cwiseProduct(h_a);
    case FusionStrategy::concat: {
      Eigen::VectorXd out(h_v.size() + h_a.size());
      out << h_v, h_a;
      return out;
    }
  }
  throw Error("fuse_modalities: unknown strategy");
}

Prediction classify(const Eigen::VectorXd& f_e, const ad::Matrix& weight, const ad::Matrix& bias) {
  if (weight.rows() != f_e.size() || weight.cols() != 1 || bias.size() != 1) throw Error("classify: width mismatch");
  Prediction p;
  p.logit = f_e.dot(weight.col(0)) + bias(0, 0);
  p.probability = sigmoid(p.logit);
  p.joint_repr = f_e;
  return p;
}

ad::Var fuse(ad::Var h_v, ad::Var h_a, FusionStrategy strategy) {
  switch (strategy) {
    case FusionStrategy::add: return ad::add(h_v, h_a);
    case FusionStrategy::product: return ad::mul(h_v, h_a);
    case FusionStrategy::concat: return ad::concat_cols(h_v, h_a);
  }
  throw Error("fuse: unknown strategy");
}

namespace {

ad::Matrix stack_frames(std::span<const SampleData* const> batch, bool video, Eigen::Index expect_dim) {
  Eigen::Index rows = 0;
  for (const SampleData* s : batch) {
    const EmbeddingSequence& e = video ? s->video : s->audio;
    if (e.num_frames == 0) throw Error("sample " + s->sample.id + ": " + (video ? "video" : "audio") + " not loaded");
    if (static_cast<Eigen::Index>(e.dim) != expect_dim)
      throw Error("sample " + s->sample.id + ": " + (video ? "video" : "audio") + " embedding dim mismatch");
    rows += static_cast<Eigen::Index>(e.num_frames);
  }
  ad::Matrix out(rows, expect_dim);
  Eigen::Index r = 0;
  for (const SampleData* s : batch) {
    const EmbeddingSequence& e = video ? s->video : s->audio;
    for (std::size_t t = 0; t < e.num_frames; ++t, ++r) {
      const auto src = e.row(t);
      for (Eigen::Index k = 0; k < expect_dim; ++k) out(r, k) = src[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

std::vector<Eigen::Index> lengths_of(std::span<const SampleData* const> batch, bool video) {
  std::vector<Eigen::Index> out;
  for (const SampleData* s : batch) out.push_back(static_cast<Eigen::Index>((video ? s->video : s->audio).num_frames));
  return out;
}

std::vector<ad::Segment> segments_of(std::span<const Eigen::Index> lengths) {
  std::vector<ad::Segment> out;
  Eigen::Index off = 0;
  for (Eigen::Index len : lengths) {
    out.push_back({off, len});
    off += len;
  }
  return out;
}

}  // namespace

BatchOutput forward_batch(const ParamBinding& p, const ModelOptions& o, std::span<const SampleData* const> batch,
                          const EncoderContext& ctx) {
  if (batch.empty()) throw Error("forward_batch: empty batch");
  ad::Tape& tape = p.tape();
  BatchOutput out;
  if (o.uses_video()) {
    const auto lengths = lengths_of(batch, true);
    ad::Var frames = tape.constant(stack_frames(batch, true, o.encoder.model_dim));
    if (o.use_temporal_transformers) {
      out.h_v = encode_batch(p, "video.", o.encoder, frames, lengths, ctx);
    } else {
      out.h_v = ad::segment_mean(frames, segments_of(lengths));
    }
  }
  if (o.uses_audio()) {
    const auto lengths = lengths_of(batch, false);
    ad::Var frames = tape.constant(stack_frames(batch, false, o.audio_input_dim));
    if (o.use_temporal_transformers) {
      out.h_a = encode_batch(p, "audio.", o.encoder, linear(p, "audio_proj", frames), lengths, ctx);
    } else {
      // The projection is affine, so projecting the mean equals the mean of projections.
      out.h_a = linear(p, "audio_proj", ad::segment_mean(frames, segments_of(lengths)));
    }
  }
  if (o.modality == ModalityMode::both) {
    out.joint = fuse(out.h_v, out.h_a, o.fusion);
  } else {
    out.joint = o.uses_video() ? out.h_v : out.h_a;
  }
  if (o.separate_heads()) {
    if (o.uses_video()) out.logit_v = linear(p, "head_video", out.h_v);
    if (o.uses_audio()) out.logit_a = linear(p, "head_audio", out.h_a);
  } else {
    out.logit = linear(p, "head", out.joint);
  }
  return out;
}

ad::Var emoforensics_loss(const ParamBinding& p, const ModelOptions& o, std::span<const SampleData* const> batch,
                          const LossOptions& loss, const EncoderContext& ctx, Rng& pair_rng, LossParts* parts,
                          BatchOutput* forward_out) {
  if (!(loss.alpha >= 0.0 && loss.alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
  if (!(loss.margin > 0.0)) throw ConfigError("margin must be positive");
  const BatchOutput out = forward_batch(p, o, batch, ctx);

  std::vector<double> y, y_v, y_a;
  std::vector<int> labels;
  for (const SampleData* s : batch) {
    y.push_back(s->sample.label);
    y_v.push_back(s->sample.video_fake ? 1.0 : 0.0);
    y_a.push_back(s->sample.audio_fake ? 1.0 : 0.0);
    labels.push_back(s->sample.label);
  }

  ad::Var bce;
  if (!o.separate_heads()) {
    bce = ad::bce_with_logits(out.logit, y);
  } else if (o.modality == ModalityMode::both) {
    bce = ad::scale(ad::add(ad::bce_with_logits(out.logit_v, y_v), ad::bce_with_logits(out.logit_a, y_a)), 0.5);
  } else if (o.uses_video()) {
    bce = ad::bce_with_logits(out.logit_v, y_v);
  } else {
    bce = ad::bce_with_logits(out.logit_a, y_a);
  }

  LossParts local;
  local.bce = bce.value()(0, 0);
  ad::Var total = bce;
  if (loss.contrastive && o.modality == ModalityMode::both) {
    const auto plan = plan_contrastive_pairs(labels, pair_rng);
    local.num_pairs = plan.size();
    if (!plan.empty()) {
      std::vector<ad::RowRef> vrows, arows;
      std::vector<double> pair_labels;
      for (const PairIndex& pi : plan) {
        vrows.push_back({0, static_cast<Eigen::Index>(pi.video_row)});
        arows.push_back({0, static_cast<Eigen::Index>(pi.audio_row)});
        pair_labels.push_back(pi.label);
      }
      const ad::Var vs[] = {out.h_v};
      const ad::Var as[] = {out.h_a};
      ad::Var c = ad::contrastive_margin(ad::gather_rows(vs, vrows), ad::gather_rows(as, arows), pair_labels, loss.margin);
      local.contrast = c.value()(0, 0);
      total = ad::add(ad::scale(bce, 1.0 - loss.alpha), ad::scale(c, loss.alpha));
    } else {
      total = ad::scale(bce, 1.0 - loss.alpha);
    }
  }
  if (parts != nullptr) *parts = local;
  if (forward_out != nullptr) *forward_out = out;
  return total;
}

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// logit of 1 - (1 - sigmoid(a)) (1 - sigmoid(b)).
double noisy_or_logit(double a, double b) {
  const double log_q = -softplus(a) - softplus(b);  // log P(neither fake)
  return std::log(-std::expm1(log_q)) - log_q;
}

}  // namespace

std::vector<double> overall_logits(const ModelOptions& o, const BatchOutput& out) {
  std::vector<double> result;
  if (!o.separate_heads()) {
    const ad::Matrix& l = out.logit.value();
    for (Eigen::Index i = 0; i < l.rows(); ++i) result.push_back(l(i, 0));
  } else if (o.modality == ModalityMode::both) {
    const ad::Matrix& lv = out.logit_v.value();
    const ad::Matrix& la = out.logit_a.value();
    for (Eigen::Index i = 0; i < lv.rows(); ++i) result.push_back(noisy_or_logit(lv(i, 0), la(i, 0)));
  } else {
    const ad::Matrix& l = (o.uses_video() ? out.logit_v : out.logit_a).value();
    for (Eigen::Index i = 0; i < l.rows(); ++i) result.push_back(l(i, 0));
  }
  return result;
}

std::vector<Prediction> predict(const EmoForensicsModel& model, const Dataset& data, std::size_t batch_size) {
  if (batch_size == 0) throw Error("predict: batch_size must be positive");
  std::vector<Prediction> preds;
  preds.reserve(data.size());
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<const SampleData*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&data[i]);
    ad::Tape tape;
    ParamBinding binding(tape, model.params, false);
    const BatchOutput out = forward_batch(binding, model.options, batch, EncoderContext{});
    const auto logits = overall_logits(model.options, out);
    const ad::Matrix& joint = out.joint.value();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Prediction p;
      p.logit = logits[i];
      p.probability = sigmoid(p.logit);
      p.joint_repr = joint.row(static_cast<Eigen::Index>(i)).transpose();
      preds.push_back(std::move(p));
    }
  }
  return preds;
}

Prediction predict(const EmoForensicsModel& model, const SampleData& sample) {
  Dataset one{sample};
  return predict(model, one, 1).front();
}

LoadOptions load_options_for(const ModelOptions& o) { return {o.uses_video(), o.uses_audio()}; }

}  // namespace emo
