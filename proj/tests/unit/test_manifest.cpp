#include <gtest/gtest.h>

#include "emo/dataset.hpp"
#include "emo/error.hpp"
#include "emo/manifest.hpp"
#include "emo/synthetic.hpp"
#include "test_util.hpp"

using namespace emo;

namespace {

Sample fake(const std::string& id, bool v, bool a, const std::string& tag) {
  Sample s;
  s.id = id;
  s.label = 1;
  s.video_fake = v;
  s.audio_fake = a;
  s.manipulation_tags = {tag};
  s.group_key = id;
  return s;
}

}  // namespace

TEST(Manifest, LabelInvariant) {
  Sample s = fake("x", true, false, "A");
  EXPECT_NO_THROW(validate(s));
  s.label = 0;
  EXPECT_THROW(validate(s), Error);
  Sample r;
  r.id = "r";
  r.manipulation_tags = {"A"};
  EXPECT_THROW(validate(r), Error);
  Sample untagged = fake("u", false, true, "A");
  untagged.manipulation_tags.clear();
  EXPECT_THROW(validate(untagged), Error);
}

TEST(Manifest, JsonRoundTrip) {
  DatasetManifest m;
  m.samples.push_back(fake("a", true, true, "B"));
  Sample r;
  r.id = "b";
  r.group_key = "g1";
  m.samples.push_back(r);
  m.metadata["generator"] = "test";
  const auto back = manifest_from_json(to_json(m));
  ASSERT_EQ(back.samples.size(), 2u);
  EXPECT_EQ(back.samples[0].manipulation_tags, std::set<std::string>{"B"});
  EXPECT_TRUE(back.samples[0].audio_fake);
  EXPECT_EQ(back.samples[1].group_key, "g1");
  EXPECT_EQ(back.metadata.at("generator"), "test");
  EXPECT_EQ(dump_manifest(back), dump_manifest(m));
}

TEST(Manifest, DuplicateIdsRejected) {
  DatasetManifest m;
  m.samples.push_back(fake("a", true, false, "A"));
  m.samples.push_back(fake("a", true, false, "A"));
  EXPECT_THROW(validate(m, false), Error);
}

TEST(Manifest, SubsetKeepsManifestOrder) {
  DatasetManifest m;
  for (const char* id : {"a", "b", "c"}) m.samples.push_back(fake(id, true, false, "A"));
  const auto s = subset(m, {"c", "a"});
  ASSERT_EQ(s.samples.size(), 2u);
  EXPECT_EQ(s.samples[0].id, "a");
  EXPECT_EQ(s.samples[1].id, "c");
  EXPECT_THROW(subset(m, {"zz"}), Error);
}

TEST(Dataset, LoadAlignsAudioToVideo) {
  emo::testing::TempDir dir("ds");
  const auto cfg = emo::testing::tiny_synth(4);
  const DatasetManifest m = generate_synthetic_dataset(cfg, dir.path());
  const DatasetManifest loaded = load_manifest(dir.path() / "manifest.json");
  EXPECT_EQ(dump_manifest(loaded), dump_manifest(m));
  const Dataset d = load_dataset(loaded);
  ASSERT_EQ(d.size(), cfg.total());
  for (const auto& s : d) {
    EXPECT_EQ(s.video.num_frames, cfg.seq_len_video);
    EXPECT_EQ(s.audio.num_frames, cfg.seq_len_video);
    EXPECT_EQ(s.audio.dim, cfg.audio_dim);
  }
}

TEST(Dataset, VideoOnlyNeverReadsAudio) {
  emo::testing::TempDir dir("ds_vo");
  DatasetManifest m = generate_synthetic_dataset(emo::testing::tiny_synth(4), dir.path());
  std::filesystem::remove(m.resolve(m.samples[0].audio_path));
  const Dataset d = load_dataset(m, {true, false});
  EXPECT_EQ(d[0].audio.num_frames, 0u);
  EXPECT_THROW(load_dataset(m), Error);
}
