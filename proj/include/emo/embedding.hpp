#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace emo {

enum class Modality : std::uint8_t { video = 0, audio = 1 };

std::string_view to_string(Modality m);

/// Frame-level emotion embeddings of one modality, row-major num_frames x dim.
struct EmbeddingSequence {
  Modality modality = Modality::video;
  std::size_t num_frames = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  std::string sample_id;

  std::span<const float> row(std::size_t t) const { return {data.data() + t * dim, dim}; }
  std::span<float> row(std::size_t t) { return {data.data() + t * dim, dim}; }
  float at(std::size_t t, std::size_t k) const { return data[t * dim + k]; }

  bool operator==(const EmbeddingSequence&) const = default;
};

/// Throws Error if the shape is inconsistent or any value is non-finite.
void validate(const EmbeddingSequence& seq);

struct EmbeddingHeader {
  Modality modality = Modality::video;
  std::uint32_t num_frames = 0;
  std::uint32_t dim = 0;
};

// On-disk layout, all integers little-endian:
//   "EMOS" | u32 version (=1) | u8 modality | 3 reserved zero bytes |
//   u32 T | u32 d | T*d binary32 payload, row-major.
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderSize = 20;

std::vector<std::uint8_t> encode_embedding(const EmbeddingSequence& seq);
EmbeddingSequence decode_embedding(std::span<const std::uint8_t> bytes, std::string sample_id = {});

void write_embedding_file(const EmbeddingSequence& seq, const std::filesystem::path& destination);

/// The sample id defaults to the file stem when not given.
EmbeddingSequence read_embedding_file(const std::filesystem::path& source, std::string sample_id = {});

/// Reads and validates only the fixed-size header.
EmbeddingHeader read_embedding_header(const std::filesystem::path& source);

/// Segment mean pooling: output frame i averages source frames
/// [floor(i*T/L), floor((i+1)*T/L)).
EmbeddingSequence downsample_to_length(const EmbeddingSequence& seq, std::size_t target_len);

}  // namespace emo
