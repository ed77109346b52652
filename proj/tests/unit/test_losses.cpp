#include <gtest/gtest.h>

#include <cmath>

#include "emo/error.hpp"
#include "emo/losses.hpp"

using namespace emo;

TEST(Bce, AnalyticValues) {
  EXPECT_NEAR(bce_loss(0.5, 0), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(0.5, 1), 0.693147, 1e-6);
  EXPECT_NEAR(bce_loss(0.25, 1), 1.386294, 1e-6);
  EXPECT_LT(bce_from_logit(30.0, 1), 1e-10);
  EXPECT_LT(bce_from_logit(-30.0, 0), 1e-10);
  EXPECT_NEAR(bce_from_logit(0.7, 0), bce_loss(sigmoid(0.7), 0), 1e-12);
  EXPECT_THROW(bce_loss(0.0, 1), Error);
  EXPECT_THROW(bce_loss(1.0, 0), Error);
}

TEST(Contrastive, Distances) {
  Eigen::VectorXd a(3), b(3);
  a << 1, 2, 3;
  EXPECT_NEAR(contrastive_distance(a, a), 0.0, 1e-12);
  EXPECT_NEAR(contrastive_distance(a, 4.0 * a), 0.0, 1e-12);  // scale-free
  EXPECT_NEAR(contrastive_distance(a, -a), 2.0, 1e-12);
  a << 1, 0, 0;
  b << 0, 1, 0;
  EXPECT_NEAR(contrastive_distance(a, b), 1.414214, 1e-6);
  EXPECT_THROW(contrastive_distance(a, Eigen::VectorXd::Zero(3)), Error);
}

TEST(Contrastive, Losses) {
  Eigen::VectorXd e1(2), e2(2);
  e1 << 1, 0;
  e2 << 0, 1;
  EXPECT_NEAR(contrastive_loss({e1, e1, 1}, 1.0), 0.0, 1e-12);
  EXPECT_NEAR(contrastive_loss({e1, e1, 0}, 1.0), 1.0, 1e-12);
  EXPECT_NEAR(contrastive_loss({e1, e2, 1}, 1.0), 2.0, 1e-12);
  EXPECT_NEAR(contrastive_loss({e1, e2, 0}, 1.0), 0.0, 1e-12);  // beyond the margin
}

TEST(Combined, Weighting) {
  EXPECT_EQ(combined_loss(0.3, 2.0, 0.0), 0.3);
  EXPECT_EQ(combined_loss(0.3, 2.0, 1.0), 2.0);
  EXPECT_NEAR(combined_loss(0.693147, 2.0, 0.5), 1.346574, 1e-6);
  EXPECT_THROW(combined_loss(0.3, 2.0, 1.5), Error);
}

namespace {

std::vector<BatchEntry> batch_of(const std::vector<int>& labels, std::vector<Sample>& storage) {
  storage.clear();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Sample s;
    s.id = "s" + std::to_string(i);
    s.label = labels[i];
    s.video_fake = labels[i] == 1;
    if (s.video_fake) s.manipulation_tags = {"A"};
    storage.push_back(s);
  }
  std::vector<BatchEntry> b;
  for (auto& s : storage) b.push_back({&s, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)});
  return b;
}

}  // namespace

TEST(Pairs, CountsFollowTheRule) {
  Rng rng(1);
  std::vector<Sample> st;
  auto three_real = build_contrastive_pairs(batch_of({0, 0, 0}, st), rng);
  EXPECT_EQ(three_real.size(), 3u);
  for (const auto& p : three_real) EXPECT_EQ(p.pair_label, 1);

  auto mixed = build_contrastive_pairs(batch_of({0, 1, 0, 1}, st), rng);
  EXPECT_EQ(mixed.size(), 6u);
  int pos = 0;
  for (const auto& p : mixed) pos += p.pair_label;
  EXPECT_EQ(pos, 2);

  EXPECT_TRUE(build_contrastive_pairs(batch_of({1, 1}, st), rng).empty());
}

TEST(Pairs, NegativesPartnerARealBothWays) {
  Rng rng(5);
  const std::vector<int> labels{1, 0, 1, 0, 0, 1};
  for (int trial = 0; trial < 50; ++trial) {
    const auto plan = plan_contrastive_pairs(labels, rng);
    ASSERT_EQ(plan.size(), 3u + 2u * 3u);
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const auto& p = plan[i];
      if (p.label == 1) {
        EXPECT_EQ(p.video_row, p.audio_row);
        EXPECT_EQ(labels[p.video_row], 0);
        continue;
      }
      // Exactly one side is fake, never a fake-fake pair.
      EXPECT_NE(labels[p.video_row], labels[p.audio_row]);
    }
  }
}

TEST(Pairs, PartnerDrawIsUniform) {
  Rng rng(9);
  const std::vector<int> labels{1, 0, 0, 0};
  std::array<int, 4> hits{};
  for (int t = 0; t < 6000; ++t) {
    for (const auto& p : plan_contrastive_pairs(labels, rng)) {
      if (p.label == 0 && p.video_row == 0) ++hits[p.audio_row];
    }
  }
  for (int r = 1; r < 4; ++r) EXPECT_NEAR(hits[r] / 6000.0, 1.0 / 3.0, 0.03);
}
