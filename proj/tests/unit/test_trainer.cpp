#include <gtest/gtest.h>

#include "emo/error.hpp"
#include "emo/metrics.hpp"
#include "test_util.hpp"

using namespace emo;
using emo::testing::tiny_synth;
using emo::testing::tiny_train;

namespace {

struct Data {
  Dataset train, val;
};

Data small_data() {
  auto all = synthesize_dataset(tiny_synth(16, 4));
  Data d;
  for (std::size_t i = 0; i < all.size(); ++i) (i % 4 == 0 ? d.val : d.train).push_back(all[i]);
  return d;
}

}  // namespace

TEST(Trainer, ZeroLearningRateKeepsParameters) {
  const auto d = small_data();
  auto cfg = tiny_train();
  cfg.learning_rate = 0.0;
  const auto result = train_emoforensics(d.train, d.val, cfg);
  EXPECT_EQ(result.model.params.checksum(), init_emoforensics(cfg.model_options(), cfg.seed).params.checksum());
  EXPECT_EQ(result.history.size(), 3u);
}

TEST(Trainer, SameSeedSameParameters) {
  const auto d = small_data();
  auto cfg = tiny_train();
  cfg.seed = 17;
  const auto a = train_emoforensics(d.train, d.val, cfg);
  const auto b = train_emoforensics(d.train, d.val, cfg);
  EXPECT_EQ(a.model.params.checksum(), b.model.params.checksum());
  EXPECT_EQ(history_to_json(a.history), history_to_json(b.history));
  cfg.seed = 18;
  EXPECT_NE(train_emoforensics(d.train, d.val, cfg).model.params.checksum(), a.model.params.checksum());
}

TEST(Trainer, LossDecreasesAndBestEpochIsKept) {
  const auto d = small_data();
  auto cfg = tiny_train();
  cfg.max_epochs = 8;
  std::vector<EpochRecord> seen;
  const auto r = train_emoforensics(d.train, d.val, cfg, [&](const EpochRecord& e) { seen.push_back(e); });
  ASSERT_EQ(seen.size(), r.history.size());
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  double best = 1e300;
  int best_epoch = 0;
  for (const auto& e : r.history) {
    if (e.val_loss < best) best = e.val_loss, best_epoch = e.epoch;
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_NEAR(evaluate_loss(r.model, d.val, cfg), best, 1e-9);
}

TEST(Trainer, EarlyStoppingEndsTraining) {
  const auto d = small_data();
  auto cfg = tiny_train();
  cfg.max_epochs = 40;
  cfg.early_stop_patience = 1;
  cfg.learning_rate = 0.05;
  const auto r = train_emoforensics(d.train, d.val, cfg);
  EXPECT_LT(r.history.size(), 40u);
  EXPECT_EQ(r.history.size(), static_cast<std::size_t>(r.best_epoch) + 1);
}

TEST(Trainer, ConfigValidation) {
  auto cfg = tiny_train();
  cfg.alpha = 1.2;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_train();
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_train();
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Trainer, AblatedVariantsTrain) {
  const auto d = small_data();
  for (int variant = 0; variant < 3; ++variant) {
    auto cfg = tiny_train();
    cfg.max_epochs = 2;
    if (variant == 0) cfg.disable_temporal_transformers = true;
    if (variant == 1) cfg.modality = ModalityMode::video_only;
    if (variant == 2) cfg.disable_contrastive = true;
    const auto r = train_emoforensics(d.train, d.val, cfg);
    EXPECT_EQ(r.history.size(), 2u);
    for (const auto& p : predict(r.model, d.val)) EXPECT_TRUE(std::isfinite(p.logit));
  }
}
