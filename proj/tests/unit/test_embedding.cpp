#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "emo/embedding.hpp"
#include "emo/error.hpp"
#include "emo/fs_util.hpp"
#include "test_util.hpp"

using namespace emo;

namespace {

EmbeddingSequence make_seq(std::size_t t, std::size_t d, Modality m = Modality::video) {
  EmbeddingSequence s;
  s.modality = m;
  s.num_frames = t;
  s.dim = d;
  for (std::size_t i = 0; i < t * d; ++i) s.data.push_back(static_cast<float>(i) * 0.25f - 1.0f);
  return s;
}

}  // namespace

TEST(Embedding, EncodeDecodeRoundTrip) {
  const auto s = make_seq(3, 5, Modality::audio);
  const auto bytes = encode_embedding(s);
  ASSERT_EQ(bytes.size(), kEmbeddingHeaderSize + 4 * 15);
  EXPECT_EQ(decode_embedding(bytes), s);
}

TEST(Embedding, HeaderLayout) {
  const auto bytes = encode_embedding(make_seq(2, 3, Modality::audio));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "EMOS");
  EXPECT_EQ(bytes[4], 1);   // version, little-endian
  EXPECT_EQ(bytes[8], 1);   // audio
  EXPECT_EQ(bytes[12], 2);  // T
  EXPECT_EQ(bytes[16], 3);  // d
}

TEST(Embedding, RejectsCorruption) {
  auto bytes = encode_embedding(make_seq(2, 2));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_embedding(bad_magic), Error);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_embedding(bad_version), Error);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_embedding(truncated), Error);
  auto zero_frames = bytes;
  zero_frames[12] = 0;
  EXPECT_THROW(decode_embedding(zero_frames), Error);
}

TEST(Embedding, RejectsNonFinitePayload) {
  auto s = make_seq(1, 2);
  s.data[1] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(encode_embedding(s), Error);
}

TEST(Embedding, FileRoundTripUsesStemAsId) {
  emo::testing::TempDir dir("emb");
  const auto s = make_seq(4, 2);
  write_embedding_file(s, dir.path() / "clip7.emb");
  const auto back = read_embedding_file(dir.path() / "clip7.emb");
  EXPECT_EQ(back.sample_id, "clip7");
  EXPECT_EQ(back.data, s.data);
  const auto h = read_embedding_header(dir.path() / "clip7.emb");
  EXPECT_EQ(h.num_frames, 4u);
  EXPECT_EQ(h.dim, 2u);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "clip7.emb.tmp"));
}

TEST(Embedding, DownsampleSegmentMeans) {
  EmbeddingSequence s;
  s.num_frames = 6;
  s.dim = 1;
  s.data = {1, 2, 3, 4, 5, 6};
  const auto d = downsample_to_length(s, 3);
  ASSERT_EQ(d.num_frames, 3u);
  EXPECT_FLOAT_EQ(d.data[0], 1.5f);
  EXPECT_FLOAT_EQ(d.data[1], 3.5f);
  EXPECT_FLOAT_EQ(d.data[2], 5.5f);
  // Uneven split: 5 -> 2 takes floor boundaries [0,2) and [2,5).
  s.num_frames = 5;
  s.data = {1, 2, 3, 4, 5};
  const auto e = downsample_to_length(s, 2);
  EXPECT_FLOAT_EQ(e.data[0], 1.5f);
  EXPECT_FLOAT_EQ(e.data[1], 4.0f);
  EXPECT_EQ(downsample_to_length(s, 5).data, s.data);
  EXPECT_THROW(downsample_to_length(s, 6), Error);
}
