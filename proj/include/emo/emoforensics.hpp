#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "emo/autodiff.hpp"
#include "emo/dataset.hpp"
#include "emo/params.hpp"
#include "emo/rng.hpp"
#include "emo/transformer.hpp"

namespace emo {

enum class FusionStrategy { add, concat, product };
enum class ModalityMode { both, video_only, audio_only };

std::string_view to_string(FusionStrategy f);
std::string_view to_string(ModalityMode m);
FusionStrategy parse_fusion(std::string_view s);
ModalityMode parse_modality(std::string_view s);

struct ModelOptions {
  TransformerConfig encoder;
  int audio_input_dim = 1024;
  FusionStrategy fusion = FusionStrategy::add;
  ModalityMode modality = ModalityMode::both;
  bool use_temporal_transformers = true;

  /// Ablated variants use one linear head per modality trained on that
  /// modality's label instead of the shared head on the fused vector.
  bool separate_heads() const { return !use_temporal_transformers || modality != ModalityMode::both; }
  bool uses_video() const { return modality != ModalityMode::audio_only; }
  bool uses_audio() const { return modality != ModalityMode::video_only; }
  Eigen::Index joint_dim() const;
  void validate() const;
};

struct EmoForensicsModel {
  ModelOptions options;
  ParamStore params;
};

EmoForensicsModel init_emoforensics(const ModelOptions& options, std::uint64_t seed);

/// Parameters plus "meta.*" tensors describing the options.
ParamStore model_checkpoint(const EmoForensicsModel& model);
EmoForensicsModel model_from_checkpoint(const ParamStore& ckpt);
void save_model(const EmoForensicsModel& model, const std::filesystem::path& path);
EmoForensicsModel load_model(const std::filesystem::path& path);

struct Prediction {
  double probability = 0.5;
  double logit = 0.0;
  Eigen::VectorXd joint_repr;
};

Eigen::VectorXd fuse_modalities(const Eigen::VectorXd& h_v, const Eigen::VectorXd& h_a, FusionStrategy strategy);

/// One affine map to a logit; weight is width x 1, bias 1 x 1.
Prediction classify(const Eigen::VectorXd& f_e, const ad::Matrix& weight, const ad::Matrix& bias);

ad::Var fuse(ad::Var h_v, ad::Var h_a, FusionStrategy strategy);

/// Differentiable forward pass over a batch.
struct BatchOutput {
  ad::Var h_v;      // B x D, invalid when the modality is unused
  ad::Var h_a;
  ad::Var joint;    // B x joint_dim
  ad::Var logit;    // B x 1, shared head (both-modality full model only)
  ad::Var logit_v;  // B x 1, separate heads
  ad::Var logit_a;
};

BatchOutput forward_batch(const ParamBinding& p, const ModelOptions& options, std::span<const SampleData* const> batch,
                          const EncoderContext& ctx);

struct LossOptions {
  double alpha = 0.5;
  double margin = 1.0;
  bool contrastive = true;
};

struct LossParts {
  double bce = 0.0;
  double contrast = 0.0;
  std::size_t num_pairs = 0;
};

/// (1 - alpha) * BCE + alpha * mean contrastive term over the batch pairs.
/// pair_rng draws the real partner of every fake. Returns a 1x1 node.
ad::Var emoforensics_loss(const ParamBinding& p, const ModelOptions& options, std::span<const SampleData* const> batch,
                          const LossOptions& loss, const EncoderContext& ctx, Rng& pair_rng, LossParts* parts = nullptr,
                          BatchOutput* forward_out = nullptr);

/// Overall fake score of each output row; separate heads combine as
/// P(video fake or audio fake) assuming independence.
std::vector<double> overall_logits(const ModelOptions& options, const BatchOutput& out);

/// Inference in batches; training=false, deterministic.
std::vector<Prediction> predict(const EmoForensicsModel& model, const Dataset& data, std::size_t batch_size = 32);
Prediction predict(const EmoForensicsModel& model, const SampleData& sample);

/// Which files a model needs at load time.
LoadOptions load_options_for(const ModelOptions& options);

}  // namespace emo
