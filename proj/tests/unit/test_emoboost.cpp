#include <gtest/gtest.h>

#include <cmath>

#include "emo/emoboost.hpp"
#include "emo/error.hpp"
#include "emo/grad_check.hpp"
#include "emo/metrics.hpp"
#include "emo/mock_detector.hpp"
#include "test_util.hpp"

using namespace emo;
using ad::Matrix;
using emo::testing::random_matrix;

namespace {

Sample fake_sample(const std::string& id, const std::string& tag) {
  Sample s;
  s.id = id;
  s.label = 1;
  s.video_fake = true;
  s.manipulation_tags = {tag};
  return s;
}

FeatureSet random_features(std::size_t n, Eigen::Index joint, Eigen::Index det, std::uint64_t seed) {
  Rng rng(seed);
  FeatureSet f;
  f.joint = random_matrix(static_cast<Eigen::Index>(n), joint, rng);
  f.detector = random_matrix(static_cast<Eigen::Index>(n), det, rng);
  for (std::size_t i = 0; i < n; ++i) {
    f.ids.push_back("s" + std::to_string(i));
    f.labels.push_back(static_cast<int>(i % 2));
    f.emo_logits.push_back(0.0);
    // Put some signal in the detector block.
    f.detector(static_cast<Eigen::Index>(i), 0) += 2.0 * f.labels.back();
  }
  return f;
}

}  // namespace

TEST(MockDetector, DeterministicAndBlindTagsDropOnlyTheLabelTerm) {
  MockDetectorConfig cfg;
  cfg.seed = 3;
  cfg.blind_tags = {"A"};
  const MockDetector det(cfg);
  const auto visible = fake_sample("clip7", "B");
  const auto blind = fake_sample("clip7", "A");
  EXPECT_EQ(det.features(visible), det.features(visible));
  EXPECT_EQ(det.features(visible).size(), 256);
  EXPECT_LT((det.features(visible) - det.features(blind) - det.label_component()).norm(), 1e-12);
  Sample real = blind;
  real.label = 0;
  real.video_fake = false;
  real.manipulation_tags.clear();
  EXPECT_EQ(det.features(real), det.features(blind));
}

TEST(MockDetector, ZeroSignalIsUninformative) {
  MockDetectorConfig cfg;
  cfg.signal_strength = 0.0;
  cfg.seed = 4;
  const MockDetector det(cfg);
  Matrix x(2000, 256);
  std::vector<int> y;
  for (int i = 0; i < 2000; ++i) {
    Sample s = i % 2 ? fake_sample("c" + std::to_string(i), "B") : Sample{};
    if (i % 2 == 0) s.id = "c" + std::to_string(i);
    x.row(i) = det.features(s).transpose();
    y.push_back(s.label);
  }
  // Fit the probe on the first half, score the second half.
  const auto probe = train_linear_probe(x.topRows(1000), std::span(y).first(1000));
  const auto scores = probe.score(x.bottomRows(1000));
  EXPECT_NEAR(roc_auc(scores, std::span(y).subspan(1000)), 0.5, 0.05);
}

TEST(MockDetector, ChecksumTracksConfig) {
  MockDetectorConfig a;
  MockDetectorConfig b = a;
  b.signal_strength = 0.5;
  EXPECT_NE(MockDetector(a).checksum(), MockDetector(b).checksum());
  EXPECT_EQ(MockDetector(a).checksum(), MockDetector(a).checksum());
  b = a;
  b.signal_strength = 1.5;
  EXPECT_THROW(b.validate(), ConfigError);
}

TEST(Sidecar, ExportAndReadBack) {
  emo::testing::TempDir dir("sidecar");
  const auto manifest = generate_synthetic_dataset(emo::testing::tiny_synth(4), dir.path() / "data");
  MockDetectorConfig cfg;
  cfg.feature_dim = 8;
  const MockDetector det(cfg);
  export_detector_features(det, manifest, dir.path() / "det");
  const SidecarDetector side(dir.path() / "det" / "index.json");
  EXPECT_EQ(side.feature_dim(), 8);
  EXPECT_EQ(side.detector_id(), "mock");
  for (const auto& s : manifest.samples) {
    // Stored as 32-bit floats.
    EXPECT_LT((side.features(s) - det.features(s)).cwiseAbs().maxCoeff(), 1e-6);
  }
  Sample unknown;
  unknown.id = "nope";
  EXPECT_THROW(side.features(unknown), Error);
}

TEST(LateFusion, Arithmetic) {
  Eigen::VectorXd a(2), b(2), expect(2);
  a << 2, 3;
  b << 4, 5;
  expect << 8, 15;
  EXPECT_EQ(fuse_late(a, b, LateFusion::product), expect);
  EXPECT_EQ(fuse_late(Eigen::VectorXd::Ones(2), b, LateFusion::product), b);
  EXPECT_EQ(fuse_late(Eigen::VectorXd::Zero(2), b, LateFusion::product), Eigen::VectorXd::Zero(2));
  EXPECT_EQ(fuse_late(a, b, LateFusion::concat).size(), 4);
  EXPECT_THROW(fuse_late(a, Eigen::VectorXd::Ones(3), LateFusion::product), Error);
}

TEST(Projection, ZeroParamsAndShape) {
  EmoBoostConfig cfg;
  auto heads = init_emoboost(12, 6, cfg);
  Rng rng(1);
  const Eigen::VectorXd f = random_matrix(12, 1, rng);
  EXPECT_EQ(project_emotion(heads, f).size(), 6);
  for (const auto& n : heads.params.names()) heads.params.at(n).setZero();
  EXPECT_EQ(project_emotion(heads, f), Eigen::VectorXd::Zero(6));
}

TEST(Projection, MatchesTwoLayerOracle) {
  EmoBoostConfig cfg;
  auto heads = init_emoboost(12, 6, cfg);
  Rng rng(2);
  for (const auto& n : heads.params.names()) {
    auto& m = heads.params.at(n);
    m = random_matrix(m.rows(), m.cols(), rng);
  }
  const Eigen::VectorXd f = random_matrix(12, 1, rng);
  const Matrix& w1 = heads.params.at("proj.fc0.weight");
  const Matrix& b1 = heads.params.at("proj.fc0.bias");
  const Matrix& w2 = heads.params.at("proj.fc1.weight");
  const Matrix& b2 = heads.params.at("proj.fc1.bias");
  Eigen::VectorXd hidden(6), out(6);
  for (int j = 0; j < 6; ++j) {
    double s = b1(0, j);
    for (int k = 0; k < 12; ++k) s += f(k) * w1(k, j);
    hidden(j) = 0.5 * s * (1.0 + std::erf(s / std::sqrt(2.0)));
  }
  for (int j = 0; j < 6; ++j) {
    double s = b2(0, j);
    for (int k = 0; k < 6; ++k) s += hidden(k) * w2(k, j);
    out(j) = s;
  }
  EXPECT_LT((project_emotion(heads, f) - out).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EmoBoost, HeadGradientsMatchFiniteDifferences) {
  for (auto fusion : {LateFusion::product, LateFusion::add, LateFusion::concat}) {
    EmoBoostConfig cfg;
    cfg.fusion = fusion;
    auto heads = init_emoboost(10, 8, cfg);
    const auto f = random_features(16, 10, 8, 5);
    std::vector<double> y(f.labels.begin(), f.labels.end());
    auto loss_at = [&](ParamStore* grads) {
      ad::Tape tape;
      ParamBinding bind(tape, heads.params, true);
      ad::Var l = emoboost_loss(bind, heads, tape.constant(f.joint), tape.constant(f.detector), y);
      if (grads) {
        tape.backward(l);
        *grads = bind.gradients();
      }
      return l.value()(0, 0);
    };
    ParamStore grads;
    loss_at(&grads);
    EXPECT_LE(gradient_check(heads.params, grads, [&] { return loss_at(nullptr); }, {1e-5, 200, 2}).max_relative_error,
              1e-4)
        << to_string(fusion);
  }
}

TEST(EmoBoost, ZeroLearningRateKeepsHeads) {
  const auto train = random_features(40, 10, 8, 1), val = random_features(20, 10, 8, 2);
  EmoBoostConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 3;
  const auto r = train_emoboost(train, val, cfg);
  EXPECT_EQ(r.heads.params.checksum(), init_emoboost(10, 8, cfg).params.checksum());
}

TEST(EmoBoost, LearnsDetectorSignalAndIsDeterministic) {
  const auto train = random_features(200, 10, 8, 1), val = random_features(100, 10, 8, 2);
  EmoBoostConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.seed = 4;
  const auto a = train_emoboost(train, val, cfg);
  const auto b = train_emoboost(train, val, cfg);
  EXPECT_EQ(a.heads.params.checksum(), b.heads.params.checksum());
  EXPECT_GT(roc_auc(emoboost_predict(a.heads, val), val.labels), 0.8);
}

TEST(EmoBoost, FrozenModelsUnchangedAndCheckpointRoundTrip) {
  const auto data = synthesize_dataset(emo::testing::tiny_synth(8));
  const auto emo_model = init_emoforensics(emo::testing::tiny_model(), 2);
  MockDetectorConfig dcfg;
  dcfg.feature_dim = 8;
  const MockDetector det(dcfg);
  const auto emo_sum = emo_model.params.checksum();
  const auto det_sum = det.checksum();
  EmoBoostConfig cfg;
  cfg.max_epochs = 2;
  const auto r = train_emoboost(data, data, emo_model, det, cfg);
  EXPECT_EQ(emo_model.params.checksum(), emo_sum);
  EXPECT_EQ(det.checksum(), det_sum);
  EXPECT_EQ(r.heads.joint_dim, 16);
  EXPECT_EQ(r.heads.detector_dim, 8);

  emo::testing::TempDir dir("heads");
  save_heads(r.heads, dir.path() / "h.ckpt");
  const auto back = load_heads(dir.path() / "h.ckpt");
  EXPECT_EQ(back.params, r.heads.params);
  EXPECT_EQ(back.fusion, r.heads.fusion);
}

TEST(EmoBoost, DimensionMismatchIsError) {
  const auto train = random_features(20, 10, 8, 1), val = random_features(20, 10, 6, 2);
  EXPECT_THROW(train_emoboost(train, val, EmoBoostConfig{}), Error);
}

TEST(Probe, SeparatesLinearlySeparableData) {
  Rng rng(3);
  Matrix x = random_matrix(200, 5, rng);
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    y.push_back(i % 2);
    x(i, 2) += 3.0 * y.back();
  }
  EXPECT_GT(roc_auc(train_linear_probe(x, y).score(x), y), 0.97);
}
