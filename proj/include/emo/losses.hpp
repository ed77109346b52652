#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "emo/manifest.hpp"
#include "emo/rng.hpp"

namespace emo {

double sigmoid(double logit);

/// -(y log p + (1-y) log(1-p)) for p in (0, 1).
double bce_loss(double probability, int label);

/// Same loss evaluated from the logit with a stable log-sigmoid.
double bce_from_logit(double logit, int label);

/// Euclidean distance between the L2-normalized inputs, in [0, 2].
double contrastive_distance(const Eigen::VectorXd& video, const Eigen::VectorXd& audio);

/// A (video-side, audio-side) pairing; label 1 = real pairing, 0 = manipulated.
struct ContrastivePair {
  Eigen::VectorXd left;
  Eigen::VectorXd right;
  int pair_label = 1;
};

/// y d^2 + (1-y) max(0, m - d)^2.
double contrastive_loss(const ContrastivePair& pair, double margin);

/// Index form of a pair inside a batch: video representation of video_row,
/// audio representation of audio_row.
struct PairIndex {
  std::size_t video_row = 0;
  std::size_t audio_row = 0;
  int label = 1;
};

/// Batch pair rule: a positive (i, i) for each real sample; for each fake F,
/// one real R drawn uniformly from the batch gives (F, R) and (R, F)
/// negatives. Fake-fake pairs are never formed. No reals -> no pairs.
std::vector<PairIndex> plan_contrastive_pairs(std::span<const int> labels, Rng& rng);

struct BatchEntry {
  const Sample* sample = nullptr;
  Eigen::VectorXd video;
  Eigen::VectorXd audio;
};

std::vector<ContrastivePair> build_contrastive_pairs(std::span<const BatchEntry> batch, Rng& rng);

/// (1 - alpha) * bce + alpha * contrast.
double combined_loss(double bce, double contrast, double alpha);

}  // namespace emo
