#include <gtest/gtest.h>

#include <fstream>

#include "emo/error.hpp"
#include "emo/optim.hpp"
#include "emo/params.hpp"
#include "test_util.hpp"

using namespace emo;
using ad::Matrix;
using emo::testing::random_matrix;

namespace {

ParamStore sample_store() {
  Rng rng(1);
  ParamStore p;
  p.add("a.weight", random_matrix(3, 4, rng));
  p.add("a.bias", random_matrix(1, 4, rng));
  p.add("meta.depth", scalar_tensor(2));
  return p;
}

}  // namespace

TEST(ParamStore, KeepsInsertionOrderAndRejectsDuplicates) {
  auto p = sample_store();
  EXPECT_EQ(p.names(), (std::vector<std::string>{"a.weight", "a.bias", "meta.depth"}));
  EXPECT_EQ(p.num_values(), 17u);
  EXPECT_THROW(p.add("a.bias", Matrix::Zero(1, 1)), Error);
  EXPECT_THROW(p.at("missing"), Error);
}

TEST(ParamStore, ChecksumSeesEveryBit) {
  auto p = sample_store();
  const auto before = p.checksum();
  p.at("a.weight")(1, 2) = std::nextafter(p.at("a.weight")(1, 2), 10.0);
  EXPECT_NE(p.checksum(), before);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto p = sample_store();
  const auto bytes = encode_checkpoint(p);
  EXPECT_EQ(decode_checkpoint(bytes), p);
  EXPECT_EQ(encode_checkpoint(decode_checkpoint(bytes)), bytes);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "EMOP");
}

TEST(Checkpoint, FileRoundTripAndErrors) {
  emo::testing::TempDir dir("ckpt");
  const auto p = sample_store();
  save_checkpoint(p, dir.path() / "m.ckpt");
  EXPECT_EQ(load_checkpoint(dir.path() / "m.ckpt"), p);
  EXPECT_THROW(load_checkpoint(dir.path() / "none.ckpt"), Error);

  auto bytes = encode_checkpoint(p);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), Error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), Error);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), Error);
}

TEST(ParamBinding, GradientsFollowFrozenFlag) {
  const auto p = sample_store();
  {
    ad::Tape tape;
    ParamBinding bind(tape, p, true);
    tape.backward(ad::sum(bind["a.weight"]));
    EXPECT_EQ(bind.gradients().at("a.weight"), Matrix::Ones(3, 4));
  }
  {
    ad::Tape tape;
    ParamBinding bind(tape, p, false);
    EXPECT_FALSE(tape.requires_grad(bind["a.weight"]));
  }
}

TEST(AdamW, FirstStepMatchesHandComputation) {
  // With bias correction the first step moves each entry by lr * g / (|g| + eps),
  // after decoupled decay p * (1 - lr * wd).
  ParamStore p, g;
  Matrix v(1, 3), gv(1, 3);
  v << 1.0, -2.0, 0.5;
  gv << 0.3, -4.0, 0.0;
  p.add("x", v);
  g.add("x", gv);
  AdamW opt(0.1, 0.01, 1e-8);
  opt.step(p, g);
  for (int i = 0; i < 3; ++i) {
    const double decayed = v(0, i) * (1 - 0.1 * 0.01);
    const double expect = decayed - 0.1 * gv(0, i) / (std::abs(gv(0, i)) + 1e-8);
    EXPECT_NEAR(p.at("x")(0, i), expect, 1e-14);
  }
  EXPECT_EQ(opt.steps(), 1);
}

TEST(AdamW, ZeroLearningRateLeavesParametersUntouched) {
  auto p = sample_store();
  const auto before = p.checksum();
  ParamStore g;
  for (const auto& n : p.names()) g.add(n, Matrix::Ones(p.at(n).rows(), p.at(n).cols()));
  AdamW opt(0.0, 0.05, 1e-8);
  for (int i = 0; i < 5; ++i) opt.step(p, g);
  EXPECT_EQ(p.checksum(), before);
}

TEST(AdamW, MinimizesAQuadratic) {
  ParamStore p;
  p.add("x", Matrix::Constant(1, 2, 5.0));
  AdamW opt(0.1, 0.0, 1e-8);
  for (int i = 0; i < 500; ++i) {
    ParamStore g;
    g.add("x", 2.0 * (p.at("x").array() - 1.0).matrix());
    opt.step(p, g);
  }
  EXPECT_NEAR(p.at("x")(0, 0), 1.0, 1e-2);
}

TEST(Plateau, ReducesAfterPatienceExceeded) {
  ReduceLROnPlateau s(2, 0.5);
  double lr = 1.0;
  lr = s.step(1.0, lr);
  EXPECT_EQ(lr, 1.0);
  lr = s.step(1.0, lr);
  lr = s.step(1.0, lr);
  EXPECT_EQ(lr, 1.0);
  lr = s.step(1.0, lr);  // third bad epoch
  EXPECT_EQ(lr, 0.5);
  lr = s.step(0.5, lr);
  EXPECT_EQ(lr, 0.5);
  EXPECT_EQ(s.bad_epochs(), 0);
}

TEST(Plateau, ThresholdIsRelative) {
  ReduceLROnPlateau s(0, 0.1, 1e-2);
  double lr = 1.0;
  lr = s.step(1.0, lr);
  lr = s.step(0.995, lr);  // not below 0.99
  EXPECT_NEAR(lr, 0.1, 1e-15);
}

TEST(EarlyStop, StopsAfterPatience) {
  EarlyStopping e(2);
  EXPECT_TRUE(e.update(1.0));
  EXPECT_FALSE(e.update(1.5));
  EXPECT_FALSE(e.should_stop());
  EXPECT_FALSE(e.update(1.0));
  EXPECT_TRUE(e.should_stop());
  EXPECT_EQ(e.best(), 1.0);
}
