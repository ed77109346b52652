#pragma once

#include <span>
#include <string>

#include "emo/autodiff.hpp"
#include "emo/params.hpp"
#include "emo/rng.hpp"

namespace emo {

/// Shape of one modality-specific temporal encoder.
struct TransformerConfig {
  int depth = 2;
  int model_dim = 512;
  int num_heads = 8;
  int ffn_multiplier = 4;
  double dropout_rate = 0.15;
  int max_seq_len = 64;
  bool use_positional = true;

  void validate() const;
};

/// Per-call switches. Dropout is applied only when training is set and the
/// rate is positive; masks are drawn from rng in a fixed order.
struct EncoderContext {
  bool training = false;
  double dropout_rate = 0.0;
  Rng* rng = nullptr;
  ad::AttentionProbe* probe = nullptr;
};

// Parameters of an encoder live under a prefix, e.g. "video.":
//   cls (1 x D), pos ((max_seq_len + 1) x D),
//   layer<i>.ln1.{gain,offset}, layer<i>.attn.qkv.weight,
//   layer<i>.attn.q.bias, layer<i>.attn.v.bias (the key block has no bias),
//   layer<i>.attn.out.{weight,bias}, layer<i>.ln2.{gain,offset},
//   layer<i>.ffn.fc1.{weight,bias}, layer<i>.ffn.fc2.{weight,bias},
//   ln_final.{gain,offset}.
void init_temporal_encoder(ParamStore& params, const std::string& prefix, const TransformerConfig& cfg, Rng& rng);

/// weight (in x out, Glorot-uniform) and bias (1 x out, zeros) under prefix.
void init_linear(ParamStore& params, const std::string& prefix, Eigen::Index in, Eigen::Index out, Rng& rng);

/// x * weight + bias.
ad::Var linear(const ParamBinding& p, const std::string& prefix, ad::Var x);

/// Inverted-dropout mask (entries 0 or 1/(1-rate)).
ad::Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

/// Encodes a batch of sequences stacked row-wise in frames (sum of lengths x
/// model_dim). Each sequence gets a leading classification token and, when
/// enabled, positional rows 0..T. Runs depth pre-norm blocks
///   x += Dropout(Attn(LN1(x))),  x += Dropout(FFN(LN2(x)))
/// and returns the layer-normalized classification-token outputs (B x D).
ad::Var encode_batch(const ParamBinding& p, const std::string& prefix, const TransformerConfig& cfg, ad::Var frames,
                     std::span<const Eigen::Index> lengths, const EncoderContext& ctx);

/// Row-wise affine projection of audio frames (T x in_dim -> T x out_dim).
ad::Matrix project_audio(const ad::Matrix& frames, const ParamStore& params, const std::string& prefix = "audio_proj");

/// Single-sequence convenience wrapper around encode_batch.
Eigen::VectorXd encode_sequence(const ad::Matrix& tokens, const ParamStore& params, const std::string& prefix,
                                const TransformerConfig& cfg, bool training, Rng* rng = nullptr,
                                ad::AttentionProbe* probe = nullptr);

}  // namespace emo
