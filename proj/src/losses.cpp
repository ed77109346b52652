#include "emo/losses.hpp"

#include <algorithm>
#include <cmath>

#include "emo/error.hpp"

namespace emo {

double sigmoid(double logit) {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

double bce_loss(double probability, int label) {
  if (!(probability > 0.0 && probability < 1.0)) throw Error("bce_loss: probability must be in (0, 1)");
  return label == 1 ? -std::log(probability) : -std::log1p(-probability);
}

double bce_from_logit(double logit, int label) {
  const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return softplus - static_cast<double>(label) * logit;
}

double contrastive_distance(const Eigen::VectorXd& video, const Eigen::VectorXd& audio) {
  if (video.size() != audio.size()) throw Error("contrastive distance: length mismatch");
  const double nv = video.norm(), na = audio.norm();
  if (nv == 0.0 || na == 0.0) throw Error("contrastive distance undefined for a zero-norm embedding");
  return (video / nv - audio / na).norm();
}

double contrastive_loss(const ContrastivePair& pair, double margin) {
  const double d = contrastive_distance(pair.left, pair.right);
  if (pair.pair_label == 1) return d * d;
  const double hinge = std::max(0.0, margin - d);
  return hinge * hinge;
}

std::vector<PairIndex> plan_contrastive_pairs(std::span<const int> labels, Rng& rng) {
  std::vector<std::size_t> reals;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0) reals.push_back(i);
  }
  std::vector<PairIndex> pairs;
  if (reals.empty()) return pairs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0) {
      pairs.push_back({i, i, 1});
    } else {
      const std::size_t r = reals[rng.uniform_index(reals.size())];
      pairs.push_back({i, r, 0});
      pairs.push_back({r, i, 0});
    }
  }
  return pairs;
}

std::vector<ContrastivePair> build_contrastive_pairs(std::span<const BatchEntry> batch, Rng& rng) {
  if (batch.empty()) throw Error("build_contrastive_pairs: empty batch");
  std::vector<int> labels;
  for (const auto& e : batch) labels.push_back(e.sample->label);
  std::vector<ContrastivePair> out;
  for (const PairIndex& p : plan_contrastive_pairs(labels, rng)) {
    out.push_back({batch[p.video_row].video, batch[p.audio_row].audio, p.label});
  }
  return out;
}

double combined_loss(double bce, double contrast, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must be in [0, 1]");
  return (1.0 - alpha) * bce + alpha * contrast;
}

}  // namespace emo
