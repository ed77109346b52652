#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emo/dataset.hpp"
#include "emo/manifest.hpp"

namespace emo {

/// Desk-scale stand-in for a labeled audio-visual deepfake corpus.
///
/// Every clip follows a smooth latent emotion trajectory of dimension
/// latent_dim. Both streams of a real clip observe the same trajectory through
/// two fixed random linear maps (latent -> video_dim, latent -> audio_dim) plus
/// small frame noise. A manipulated stream either follows an independent
/// trajectory (inter-modal inconsistency) or carries piecewise-constant jumps
/// (intra-modal inconsistency); the mechanism is drawn 50/50 per fake clip.
/// Manipulated streams also drift along a fixed per-modality direction.
/// All deviations scale with inconsistency_strength; at 0 fakes and reals share
/// one generative law.
struct SynthConfig {
  std::size_t num_real = 0;
  std::size_t num_fake_video = 0;
  std::size_t num_fake_audio = 0;
  std::size_t num_fake_both = 0;
  std::size_t seq_len_video = 16;
  std::size_t seq_len_audio = 32;
  std::size_t latent_dim = 8;
  double inconsistency_strength = 1.0;
  std::vector<std::string> manipulation_tag_pool{"A", "B", "C", "D"};
  std::uint64_t seed = 0;
  std::size_t video_dim = 512;
  std::size_t audio_dim = 1024;

  std::size_t total() const { return num_real + num_fake_video + num_fake_audio + num_fake_both; }
  void validate() const;
};

enum class InconsistencyKind { none, inter_modal, intra_modal };

/// A generated clip with full-rate embeddings (audio not yet aligned).
struct SyntheticClip {
  Sample sample;
  EmbeddingSequence video;
  EmbeddingSequence audio;
  InconsistencyKind kind = InconsistencyKind::none;
};

/// Generates clip index in [0, cfg.total()). Clips are ordered reals, fake
/// video, fake audio, fake both. Pure function of (cfg, index).
SyntheticClip synthesize_clip(const SynthConfig& cfg, std::size_t index);

/// All clips in memory with audio aligned to the video length, identical to
/// what load_dataset returns for the files written by generate_synthetic_dataset.
Dataset synthesize_dataset(const SynthConfig& cfg);

/// Writes out_dir/manifest.json plus one embedding file per clip and modality
/// under out_dir/emb/. Returns the manifest (base_dir = out_dir).
DatasetManifest generate_synthetic_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace emo
