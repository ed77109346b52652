#pragma once

#include <span>
#include <vector>

namespace emo {

/// Scores aligned with binary labels (1 = positive / fake).
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;
};

/// Mann-Whitney AUC: P(score_pos > score_neg) with ties counting one half.
/// Throws "AUC undefined" when only one class is present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);
double roc_auc(const ScoredSet& set);

/// Mean precision at the rank of each positive, scores sorted descending
/// with ties broken by original index (earlier first). No interpolation.
double average_precision(std::span<const double> scores, std::span<const int> labels);
double average_precision(const ScoredSet& set);

}  // namespace emo
