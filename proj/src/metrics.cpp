#include "emo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emo/error.hpp"

namespace emo {

namespace {

void check(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
  if (scores.empty()) throw Error("empty scored set");
  for (double s : scores) {
    if (std::isnan(s)) throw Error("score is NaN");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error("labels must be 0 or 1");
  }
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check(scores, labels);
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int l : labels) pos += static_cast<std::size_t>(l);
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw Error("AUC undefined: need both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Per tie block: each positive beats every negative below the block and
  // gets half credit for negatives inside it. Counts are integers (doubled)
  // until the final division, so the result is exact.
  std::size_t neg_below = 0;
  unsigned long long twice_wins = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t block_pos = 0, block_neg = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++block_pos; else ++block_neg;
      ++j;
    }
    twice_wins += static_cast<unsigned long long>(block_pos) * (2 * neg_below + block_neg);
    neg_below += block_neg;
    i = j;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double roc_auc(const ScoredSet& set) { return roc_auc(set.scores, set.labels); }

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) throw Error("average precision undefined: no positives");
  return sum / static_cast<double>(hits);
}

double average_precision(const ScoredSet& set) { return average_precision(set.scores, set.labels); }

}  // namespace emo
