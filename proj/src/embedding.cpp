#include "emo/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "emo/error.hpp"
#include "emo/fs_util.hpp"

namespace emo {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'O', 'S'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

EmbeddingHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kEmbeddingHeaderSize) throw Error("size mismatch: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("bad magic");
  if (get_u32(bytes.data() + 4) != kEmbeddingFormatVersion) throw Error("version mismatch");
  const std::uint8_t mod = bytes[8];
  if (mod > 1) throw Error("bad modality byte");
  if (bytes[9] != 0 || bytes[10] != 0 || bytes[11] != 0) throw Error("reserved bytes not zero");
  EmbeddingHeader h;
  h.modality = static_cast<Modality>(mod);
  h.num_frames = get_u32(bytes.data() + 12);
  h.dim = get_u32(bytes.data() + 16);
  if (h.num_frames == 0) throw Error("header declares zero frames");
  if (h.dim == 0) throw Error("header declares zero dim");
  return h;
}

}  // namespace

std::string_view to_string(Modality m) { return m == Modality::video ? "video" : "audio"; }

void validate(const EmbeddingSequence& seq) {
  if (seq.num_frames == 0) throw Error("num_frames must be positive");
  if (seq.dim == 0) throw Error("dim must be positive");
  if (seq.data.size() != seq.num_frames * seq.dim) throw Error("size mismatch: data length != num_frames * dim");
  for (float v : seq.data) {
    if (!std::isfinite(v)) throw Error("non-finite value");
  }
}

std::vector<std::uint8_t> encode_embedding(const EmbeddingSequence& seq) {
  validate(seq);
  if (seq.num_frames > UINT32_MAX || seq.dim > UINT32_MAX) throw Error("shape exceeds u32 range");
  std::vector<std::uint8_t> out;
  out.reserve(kEmbeddingHeaderSize + 4 * seq.data.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kEmbeddingFormatVersion);
  out.push_back(static_cast<std::uint8_t>(seq.modality));
  out.insert(out.end(), 3, 0);
  put_u32(out, static_cast<std::uint32_t>(seq.num_frames));
  put_u32(out, static_cast<std::uint32_t>(seq.dim));
  for (float v : seq.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

EmbeddingSequence decode_embedding(std::span<const std::uint8_t> bytes, std::string sample_id) {
  const EmbeddingHeader h = parse_header(bytes);
  const std::uint64_t count = static_cast<std::uint64_t>(h.num_frames) * h.dim;
  if (bytes.size() != kEmbeddingHeaderSize + 4 * count) throw Error("size mismatch: payload length");
  EmbeddingSequence seq;
  seq.modality = h.modality;
  seq.num_frames = h.num_frames;
  seq.dim = h.dim;
  seq.sample_id = std::move(sample_id);
  seq.data.resize(count);
  const std::uint8_t* p = bytes.data() + kEmbeddingHeaderSize;
  for (std::size_t i = 0; i < count; ++i, p += 4) {
    const float v = std::bit_cast<float>(get_u32(p));
    if (!std::isfinite(v)) throw Error("non-finite value");
    seq.data[i] = v;
  }
  return seq;
}

void write_embedding_file(const EmbeddingSequence& seq, const std::filesystem::path& destination) {
  write_file_atomic(destination, encode_embedding(seq));
}

EmbeddingSequence read_embedding_file(const std::filesystem::path& source, std::string sample_id) {
  if (sample_id.empty()) sample_id = source.stem().string();
  return decode_embedding(read_file_bytes(source), std::move(sample_id));
}

EmbeddingHeader read_embedding_header(const std::filesystem::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw Error("cannot open file: " + source.string());
  std::uint8_t buf[kEmbeddingHeaderSize];
  in.read(reinterpret_cast<char*>(buf), kEmbeddingHeaderSize);
  return parse_header(std::span(buf, static_cast<std::size_t>(in.gcount())));
}

EmbeddingSequence downsample_to_length(const EmbeddingSequence& seq, std::size_t target_len) {
  if (target_len == 0) throw Error("target_len must be positive");
  if (target_len > seq.num_frames) throw Error("target_len exceeds num_frames");
  EmbeddingSequence out;
  out.modality = seq.modality;
  out.num_frames = target_len;
  out.dim = seq.dim;
  out.sample_id = seq.sample_id;
  if (target_len == seq.num_frames) {
    out.data = seq.data;
    return out;
  }
  out.data.assign(target_len * seq.dim, 0.0f);
  std::vector<double> acc(seq.dim);
  const std::size_t total = seq.num_frames;
  for (std::size_t i = 0; i < target_len; ++i) {
    const std::size_t begin = i * total / target_len;
    const std::size_t end = (i + 1) * total / target_len;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = begin; t < end; ++t) {
      auto r = seq.row(t);
      for (std::size_t k = 0; k < seq.dim; ++k) acc[k] += r[k];
    }
    const double inv = 1.0 / static_cast<double>(end - begin);
    auto dst = out.row(i);
    for (std::size_t k = 0; k < seq.dim; ++k) dst[k] = static_cast<float>(acc[k] * inv);
  }
  return out;
}

}  // namespace emo
