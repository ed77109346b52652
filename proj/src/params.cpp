#include "emo/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "emo/error.hpp"
#include "emo/fs_util.hpp"
#include "emo/hash.hpp"
#include "emo/rng.hpp"

namespace emo {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'O', 'P'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("checkpoint truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void ParamStore::add(const std::string& name, ad::Matrix value) {
  if (name.empty()) throw Error("tensor name must be nonempty");
  if (!tensors_.emplace(name, std::move(value)).second) throw Error("duplicate tensor name: " + name);
  order_.push_back(name);
}

ad::Matrix& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("unknown tensor: " + name);
  return it->second;
}

const ad::Matrix& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("unknown tensor: " + name);
  return it->second;
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors_) n += static_cast<std::size_t>(m.size());
  return n;
}

std::uint64_t ParamStore::checksum() const {
  Fnv1a h;
  for (const auto& name : order_) {
    const ad::Matrix& m = tensors_.at(name);
    h.update(name);
    h.update_u64(static_cast<std::uint64_t>(m.rows()));
    h.update_u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) h.update_f64(m.data()[i]);
  }
  return h.digest();
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (order_ != other.order_) return false;
  for (const auto& name : order_) {
    const ad::Matrix& a = tensors_.at(name);
    const ad::Matrix& b = other.tensors_.at(name);
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) != 0) return false;
  }
  return true;
}

ParamBinding::ParamBinding(ad::Tape& tape, const ParamStore& params, bool trainable) : tape_(&tape) {
  for (const auto& name : params.names()) {
    names_.push_back(name);
    vars_.emplace(name, trainable ? tape.variable_ref(params.at(name)) : tape.constant_ref(params.at(name)));
  }
}

ad::Var ParamBinding::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw Error("unbound tensor: " + name);
  return it->second;
}

ParamStore ParamBinding::gradients() const {
  ParamStore g;
  for (const auto& name : names_) g.add(name, tape_->grad(vars_.at(name)));
  return g;
}

std::vector<std::uint8_t> encode_checkpoint(const ParamStore& params) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& name : params.names()) {
    const ad::Matrix& m = params.at(name);
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  }
  return out;
}

ParamStore decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw Error("bad checkpoint magic");
  if (r.u32() != kCheckpointVersion) throw Error("checkpoint version mismatch");
  const std::uint32_t count = r.u32();
  ParamStore params;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = r.str(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > 2) throw Error("checkpoint tensor rank > 2: " + name);
    Eigen::Index rows = 1, cols = 1;
    if (rank == 1) cols = r.u32();
    if (rank == 2) {
      rows = r.u32();
      cols = r.u32();
    }
    ad::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double v = std::bit_cast<double>(r.u64());
      if (!std::isfinite(v)) throw Error("non-finite value in checkpoint tensor " + name);
      m.data()[i] = v;
    }
    params.add(name, std::move(m));
  }
  if (!r.done()) throw Error("trailing bytes in checkpoint");
  return params;
}

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(params));
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  return decode_checkpoint(read_file_bytes(path));
}

ad::Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  ad::Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

ad::Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

ad::Matrix scalar_tensor(double v) {
  ad::Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace emo
