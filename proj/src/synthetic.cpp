#include "emo/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include <Eigen/Dense>

#include "emo/error.hpp"
#include "emo/rng.hpp"

namespace emo {

namespace fs = std::filesystem;

namespace {

// Generative-law constants.
constexpr double kHarmonicAmplitude = 0.5;
constexpr int kNumHarmonics = 2;
constexpr double kFrameNoise = 0.1;
constexpr double kDriftMagnitude = 3.0;
constexpr double kJumpScale = 1.5;

struct Trajectory {
  Eigen::VectorXd mean;
  std::vector<Eigen::VectorXd> amplitude;
  std::vector<Eigen::VectorXd> phase;

  Eigen::VectorXd at(double tau) const {
    Eigen::VectorXd e = mean;
    for (int f = 0; f < kNumHarmonics; ++f) {
      for (Eigen::Index k = 0; k < e.size(); ++k) {
        e[k] += amplitude[f][k] * std::sin(2.0 * std::numbers::pi * (f + 1) * tau + phase[f][k]);
      }
    }
    return e;
  }
};

Trajectory draw_trajectory(Rng& rng, std::size_t k) {
  Trajectory t;
  t.mean.resize(static_cast<Eigen::Index>(k));
  for (auto& v : t.mean) v = rng.normal();
  for (int f = 0; f < kNumHarmonics; ++f) {
    Eigen::VectorXd a(static_cast<Eigen::Index>(k)), p(static_cast<Eigen::Index>(k));
    for (auto& v : a) v = kHarmonicAmplitude * rng.normal();
    for (auto& v : p) v = rng.uniform(0.0, 2.0 * std::numbers::pi);
    t.amplitude.push_back(std::move(a));
    t.phase.push_back(std::move(p));
  }
  return t;
}

// Fixed per-dataset quantities: the two observation maps and drift directions.
struct Law {
  Eigen::MatrixXd video_map;
  Eigen::MatrixXd audio_map;
  Eigen::VectorXd video_drift;
  Eigen::VectorXd audio_drift;
};

Eigen::VectorXd unit_direction(Rng& rng, std::size_t k) {
  Eigen::VectorXd u(static_cast<Eigen::Index>(k));
  for (auto& v : u) v = rng.normal();
  return u / u.norm();
}

Law make_law(const SynthConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "synthetic/law"));
  const auto k = static_cast<Eigen::Index>(cfg.latent_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  Law law;
  law.video_map.resize(static_cast<Eigen::Index>(cfg.video_dim), k);
  law.audio_map.resize(static_cast<Eigen::Index>(cfg.audio_dim), k);
  for (Eigen::Index i = 0; i < law.video_map.size(); ++i) law.video_map.data()[i] = scale * rng.normal();
  for (Eigen::Index i = 0; i < law.audio_map.size(); ++i) law.audio_map.data()[i] = scale * rng.normal();
  law.video_drift = unit_direction(rng, cfg.latent_dim);
  law.audio_drift = unit_direction(rng, cfg.latent_dim);
  return law;
}

// Latent path of one stream; manipulated streams deviate from the shared one.
struct StreamPath {
  const Trajectory* shared = nullptr;
  InconsistencyKind kind = InconsistencyKind::none;
  Trajectory independent;
  double cut1 = 0.0, cut2 = 0.0;
  Eigen::VectorXd jump1, jump2;
  Eigen::VectorXd drift;
  double strength = 0.0;

  Eigen::VectorXd at(double tau) const {
    Eigen::VectorXd e = shared->at(tau);
    if (kind == InconsistencyKind::none) return e;
    if (kind == InconsistencyKind::inter_modal) {
      const double mix = std::min(strength, 1.0);
      e = (1.0 - mix) * e + mix * independent.at(tau);
    } else {
      if (tau >= cut2) {
        e += strength * jump2;
      } else if (tau >= cut1) {
        e += strength * jump1;
      }
    }
    return e + strength * kDriftMagnitude * drift;
  }
};

StreamPath manipulated_path(const Trajectory& shared, InconsistencyKind kind, const Eigen::VectorXd& drift,
                            double strength, Rng& rng, std::size_t k) {
  StreamPath p;
  p.shared = &shared;
  p.kind = kind;
  p.drift = drift;
  p.strength = strength;
  if (kind == InconsistencyKind::inter_modal) {
    p.independent = draw_trajectory(rng, k);
  } else {
    double a = rng.uniform(0.1, 0.9), b = rng.uniform(0.1, 0.9);
    if (a > b) std::swap(a, b);
    p.cut1 = a;
    p.cut2 = b;
    p.jump1.resize(static_cast<Eigen::Index>(k));
    p.jump2.resize(static_cast<Eigen::Index>(k));
    for (auto& v : p.jump1) v = kJumpScale * rng.normal();
    for (auto& v : p.jump2) v = kJumpScale * rng.normal();
  }
  return p;
}

EmbeddingSequence render(const StreamPath& path, const Eigen::MatrixXd& map, std::size_t frames, Modality m,
                         const std::string& id, Rng& rng) {
  EmbeddingSequence seq;
  seq.modality = m;
  seq.num_frames = frames;
  seq.dim = static_cast<std::size_t>(map.rows());
  seq.sample_id = id;
  seq.data.resize(frames * seq.dim);
  for (std::size_t t = 0; t < frames; ++t) {
    const double tau = (static_cast<double>(t) + 0.5) / static_cast<double>(frames);
    const Eigen::VectorXd x = map * path.at(tau);
    auto row = seq.row(t);
    for (std::size_t i = 0; i < seq.dim; ++i) {
      row[i] = static_cast<float>(x[static_cast<Eigen::Index>(i)] + kFrameNoise * rng.normal());
    }
  }
  return seq;
}

std::string clip_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%06zu", index);
  return buf;
}

SyntheticClip synthesize_with_law(const SynthConfig& cfg, const Law& law, std::size_t index) {
  if (index >= cfg.total()) throw Error("synthetic clip index out of range");
  SyntheticClip clip;
  Sample& s = clip.sample;
  s.id = clip_id(index);
  s.group_key = s.id;
  s.video_path = "emb/" + s.id + "_video.emb";
  s.audio_path = "emb/" + s.id + "_audio.emb";

  std::size_t fake_ordinal = 0;
  if (index < cfg.num_real) {
  } else if (index < cfg.num_real + cfg.num_fake_video) {
    s.video_fake = true;
  } else if (index < cfg.num_real + cfg.num_fake_video + cfg.num_fake_audio) {
    s.audio_fake = true;
  } else {
    s.video_fake = s.audio_fake = true;
  }
  s.label = (s.video_fake || s.audio_fake) ? 1 : 0;
  if (s.label == 1) {
    fake_ordinal = index - cfg.num_real;
    s.manipulation_tags.insert(cfg.manipulation_tag_pool[fake_ordinal % cfg.manipulation_tag_pool.size()]);
  }

  Rng rng(derive_seed(cfg.seed, "synthetic/clip/" + s.id));
  const Trajectory shared = draw_trajectory(rng, cfg.latent_dim);
  if (s.label == 1) {
    clip.kind = rng.bernoulli(0.5) ? InconsistencyKind::inter_modal : InconsistencyKind::intra_modal;
  }
  StreamPath video_path;
  video_path.shared = &shared;
  StreamPath audio_path = video_path;
  if (s.video_fake) {
    video_path = manipulated_path(shared, clip.kind, law.video_drift, cfg.inconsistency_strength, rng, cfg.latent_dim);
  }
  if (s.audio_fake) {
    audio_path = manipulated_path(shared, clip.kind, law.audio_drift, cfg.inconsistency_strength, rng, cfg.latent_dim);
  }
  clip.video = render(video_path, law.video_map, cfg.seq_len_video, Modality::video, s.id, rng);
  clip.audio = render(audio_path, law.audio_map, cfg.seq_len_audio, Modality::audio, s.id, rng);
  return clip;
}

}  // namespace

void SynthConfig::validate() const {
  if (seq_len_video == 0 || seq_len_audio == 0) throw ConfigError("synthetic sequence lengths must be positive");
  if (seq_len_audio < seq_len_video) throw ConfigError("seq_len_audio must be >= seq_len_video");
  if (latent_dim == 0) throw ConfigError("latent_dim must be positive");
  if (video_dim == 0 || audio_dim == 0) throw ConfigError("embedding dims must be positive");
  if (!(inconsistency_strength >= 0.0) || !std::isfinite(inconsistency_strength)) {
    throw ConfigError("inconsistency_strength must be a non-negative finite number");
  }
  if (total() == 0) throw ConfigError("synthetic config has zero samples");
  if (num_fake_video + num_fake_audio + num_fake_both > 0 && manipulation_tag_pool.empty()) {
    throw ConfigError("manipulation_tag_pool must be nonempty when fakes are requested");
  }
}

SyntheticClip synthesize_clip(const SynthConfig& cfg, std::size_t index) {
  cfg.validate();
  return synthesize_with_law(cfg, make_law(cfg), index);
}

Dataset synthesize_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const Law law = make_law(cfg);
  Dataset out;
  out.reserve(cfg.total());
  for (std::size_t i = 0; i < cfg.total(); ++i) {
    SyntheticClip clip = synthesize_with_law(cfg, law, i);
    SampleData d;
    d.sample = std::move(clip.sample);
    d.audio = align_audio(clip.audio, clip.video.num_frames);
    d.video = std::move(clip.video);
    out.push_back(std::move(d));
  }
  return out;
}

DatasetManifest generate_synthetic_dataset(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const Law law = make_law(cfg);
  DatasetManifest m;
  m.base_dir = out_dir;
  m.metadata["generator"] = "synthetic-emotion-trajectories";
  m.metadata["seed"] = std::to_string(cfg.seed);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", cfg.inconsistency_strength);
  m.metadata["inconsistency_strength"] = buf;
  for (std::size_t i = 0; i < cfg.total(); ++i) {
    SyntheticClip clip = synthesize_with_law(cfg, law, i);
    write_embedding_file(clip.video, out_dir / clip.sample.video_path);
    write_embedding_file(clip.audio, out_dir / clip.sample.audio_path);
    m.samples.push_back(std::move(clip.sample));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace emo
