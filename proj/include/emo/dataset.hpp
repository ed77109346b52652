#pragma once

#include <vector>

#include "emo/embedding.hpp"
#include "emo/manifest.hpp"

namespace emo {

/// A sample with its embeddings in memory. Audio is already aligned to the
/// video frame count; an unloaded modality is left empty (num_frames == 0).
struct SampleData {
  Sample sample;
  EmbeddingSequence video;
  EmbeddingSequence audio;
};

using Dataset = std::vector<SampleData>;

struct LoadOptions {
  bool load_video = true;
  bool load_audio = true;
};

/// Loads and aligns embeddings. Audio is downsampled to the video length
/// before it reaches any transformer; audio shorter than the video is an error.
Dataset load_dataset(const DatasetManifest& manifest, LoadOptions opts = {});

/// Aligns a full-rate audio sequence to the given video length.
EmbeddingSequence align_audio(const EmbeddingSequence& audio, std::size_t video_frames);

}  // namespace emo
