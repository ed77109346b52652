#include "emo/dataset.hpp"

#include "emo/error.hpp"

namespace emo {

EmbeddingSequence align_audio(const EmbeddingSequence& audio, std::size_t video_frames) {
  if (audio.num_frames < video_frames) {
    throw Error("audio sequence " + audio.sample_id + " is shorter than its video sequence");
  }
  return downsample_to_length(audio, video_frames);
}

Dataset load_dataset(const DatasetManifest& manifest, LoadOptions opts) {
  Dataset out;
  out.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) {
    SampleData d;
    d.sample = s;
    std::size_t video_frames = 0;
    if (opts.load_video) {
      d.video = read_embedding_file(manifest.resolve(s.video_path), s.id);
      if (d.video.modality != Modality::video) throw Error("sample " + s.id + ": video file has audio modality");
      video_frames = d.video.num_frames;
    } else if (opts.load_audio) {
      video_frames = read_embedding_header(manifest.resolve(s.video_path)).num_frames;
    }
    if (opts.load_audio) {
      EmbeddingSequence audio = read_embedding_file(manifest.resolve(s.audio_path), s.id);
      if (audio.modality != Modality::audio) throw Error("sample " + s.id + ": audio file has video modality");
      d.audio = align_audio(audio, video_frames);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace emo
