#include <gtest/gtest.h>

#include <cmath>
#include <iostream>

#include "emo/error.hpp"
#include "emo/grad_check.hpp"
#include "emo/losses.hpp"
#include "test_util.hpp"

using namespace emo;
using ad::Matrix;
using emo::testing::random_matrix;
using emo::testing::tiny_model;
using emo::testing::tiny_synth;

namespace {

std::vector<const SampleData*> pointers(const Dataset& d) {
  std::vector<const SampleData*> out;
  for (const auto& s : d) out.push_back(&s);
  return out;
}

// Largest relative gradient error of the combined loss over the model
// parameters, pairs redrawn from the same seed on every evaluation.
double composite_gradient_error(ModelOptions options, std::size_t coords) {
  auto model = init_emoforensics(options, 21);
  const auto data = synthesize_dataset(tiny_synth(8));
  const auto batch = pointers(data);
  const LossOptions loss_opts;
  auto loss_at = [&](ParamStore* grads) {
    ad::Tape tape;
    ParamBinding bind(tape, model.params, true);
    Rng pairs(13);
    ad::Var loss = emoforensics_loss(bind, options, batch, loss_opts, {}, pairs);
    if (grads != nullptr) {
      tape.backward(loss);
      *grads = bind.gradients();
    }
    return loss.value()(0, 0);
  };
  ParamStore grads;
  loss_at(&grads);
  const auto r = gradient_check(model.params, grads, [&] { return loss_at(nullptr); }, {1e-5, coords, 4});
  if (r.max_relative_error > 1e-4) {
    std::cerr << "worst " << r.worst_coordinate << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric
              << "\n";
  }
  return r.max_relative_error;
}

}  // namespace

TEST(Fusion, IdentityElementsAndLayout) {
  Rng rng(1);
  Eigen::VectorXd hv = random_matrix(6, 1, rng), ha = random_matrix(6, 1, rng);
  EXPECT_EQ(fuse_modalities(hv, Eigen::VectorXd::Zero(6), FusionStrategy::add), hv);
  EXPECT_EQ(fuse_modalities(hv, Eigen::VectorXd::Ones(6), FusionStrategy::product), hv);
  const auto cat = fuse_modalities(hv, ha, FusionStrategy::concat);
  ASSERT_EQ(cat.size(), 12);
  EXPECT_EQ(cat.head(6), hv);
  EXPECT_EQ(cat.tail(6), ha);
  EXPECT_THROW(fuse_modalities(hv, Eigen::VectorXd::Zero(5), FusionStrategy::add), Error);
}

TEST(Classify, SigmoidOfAffine) {
  Rng rng(2);
  const Eigen::VectorXd f = random_matrix(8, 1, rng);
  EXPECT_EQ(classify(f, Matrix::Zero(8, 1), Matrix::Zero(1, 1)).probability, 0.5);
  EXPECT_GT(classify(f, Matrix::Zero(8, 1), Matrix::Constant(1, 1, 10.0)).probability, 0.9999);
  const Matrix w = random_matrix(8, 1, rng), b = random_matrix(1, 1, rng);
  double z = b(0, 0);
  for (int i = 0; i < 8; ++i) z += f(i) * w(i, 0);
  EXPECT_NEAR(classify(f, w, b).probability, 1.0 / (1.0 + std::exp(-z)), 1e-12);
}

TEST(Model, ParseEnums) {
  EXPECT_EQ(parse_fusion("concat"), FusionStrategy::concat);
  EXPECT_EQ(parse_modality("audio_only"), ModalityMode::audio_only);
  EXPECT_THROW(parse_fusion("sum"), ConfigError);
  EXPECT_THROW(parse_modality("video"), ConfigError);
}

TEST(Model, InferenceIsDeterministic) {
  const auto model = init_emoforensics(tiny_model(), 1);
  const auto data = synthesize_dataset(tiny_synth(4));
  const auto a = predict(model, data[0]);
  const auto b = predict(model, data[0]);
  EXPECT_EQ(a.logit, b.logit);
  EXPECT_EQ(a.joint_repr, b.joint_repr);
  // Batched and single-sample inference agree.
  EXPECT_NEAR(predict(model, data)[0].logit, a.logit, 1e-12);
}

TEST(Model, TransformerFreeConstantFrameIsTheVideoRepresentation) {
  auto options = tiny_model();
  options.use_temporal_transformers = false;
  const auto model = init_emoforensics(options, 1);
  auto data = synthesize_dataset(tiny_synth(4));
  auto& video = data[0].video;
  for (std::size_t t = 0; t < video.num_frames; ++t) {
    for (std::size_t k = 0; k < video.dim; ++k) video.data[t * video.dim + k] = 0.25f * static_cast<float>(k);
  }
  ad::Tape tape;
  ParamBinding bind(tape, model.params, false);
  const SampleData* one[] = {&data[0]};
  const auto out = forward_batch(bind, options, one, {});
  for (std::size_t k = 0; k < video.dim; ++k) EXPECT_DOUBLE_EQ(out.h_v.value()(0, k), 0.25 * k);
}

TEST(Model, VideoOnlyIgnoresAudio) {
  auto options = tiny_model();
  options.modality = ModalityMode::video_only;
  const auto model = init_emoforensics(options, 1);
  EXPECT_FALSE(load_options_for(options).load_audio);
  auto data = synthesize_dataset(tiny_synth(4));
  const auto before = predict(model, data[1]).logit;
  for (auto& v : data[1].audio.data) v = -v * 7.0f;
  EXPECT_EQ(predict(model, data[1]).logit, before);
  data[1].audio = {};
  EXPECT_EQ(predict(model, data[1]).logit, before);
}

TEST(Model, CheckpointRoundTrip) {
  auto options = tiny_model();
  options.fusion = FusionStrategy::concat;
  const auto model = init_emoforensics(options, 5);
  emo::testing::TempDir dir("model");
  save_model(model, dir.path() / "m.ckpt");
  const auto back = load_model(dir.path() / "m.ckpt");
  EXPECT_EQ(back.params, model.params);
  EXPECT_EQ(back.options.fusion, FusionStrategy::concat);
  EXPECT_EQ(back.options.encoder.model_dim, options.encoder.model_dim);
  EXPECT_EQ(back.options.joint_dim(), 2 * options.encoder.model_dim);
  EXPECT_THROW(load_model(dir.path() / "absent.ckpt"), ConfigError);
}

TEST(Model, SeparateHeadsScoreIsNoisyOr) {
  auto options = tiny_model();
  options.use_temporal_transformers = false;
  const auto model = init_emoforensics(options, 2);
  const auto data = synthesize_dataset(tiny_synth(4));
  ad::Tape tape;
  ParamBinding bind(tape, model.params, false);
  const auto batch = pointers(data);
  const auto out = forward_batch(bind, options, batch, {});
  const auto overall = overall_logits(options, out);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double pv = sigmoid(out.logit_v.value()(i, 0)), pa = sigmoid(out.logit_a.value()(i, 0));
    EXPECT_NEAR(sigmoid(overall[i]), 1.0 - (1.0 - pv) * (1.0 - pa), 1e-12);
  }
}

TEST(Model, LossWithoutContrastiveIsBce) {
  const auto options = tiny_model();
  const auto model = init_emoforensics(options, 3);
  const auto data = synthesize_dataset(tiny_synth(4));
  const auto batch = pointers(data);
  ad::Tape tape;
  ParamBinding bind(tape, model.params, false);
  Rng pairs(1);
  LossParts parts;
  LossOptions lo;
  const double full = emoforensics_loss(bind, options, batch, lo, {}, pairs, &parts).value()(0, 0);
  EXPECT_NEAR(full, combined_loss(parts.bce, parts.contrast, 0.5), 1e-12);
  EXPECT_EQ(parts.num_pairs, 4u + 2u * 4u);
  lo.contrastive = false;
  LossParts bce_only;
  const double ablated = emoforensics_loss(bind, options, batch, lo, {}, pairs, &bce_only).value()(0, 0);
  // The ablated objective is plain BCE.
  EXPECT_NEAR(ablated, bce_only.bce, 1e-12);
  EXPECT_EQ(bce_only.num_pairs, 0u);
}

TEST(Model, CompositeGradientMatchesFiniteDifferences) {
  for (auto fusion : {FusionStrategy::add, FusionStrategy::product, FusionStrategy::concat}) {
    auto options = tiny_model();
    options.fusion = fusion;
    EXPECT_LE(composite_gradient_error(options, 200), 1e-4) << to_string(fusion);
  }
}

TEST(Model, AblatedGradientsMatchFiniteDifferences) {
  auto options = tiny_model();
  options.use_temporal_transformers = false;
  EXPECT_LE(composite_gradient_error(options, 200), 1e-4);
  options = tiny_model();
  options.modality = ModalityMode::audio_only;
  EXPECT_LE(composite_gradient_error(options, 200), 1e-4);
}
