#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "emo/autodiff.hpp"

namespace emo {

/// Named 64-bit tensors kept in insertion order.
class ParamStore {
 public:
  void add(const std::string& name, ad::Matrix value);
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
  ad::Matrix& at(const std::string& name);
  const ad::Matrix& at(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }
  std::size_t num_values() const;

  /// FNV-1a over names, shapes and raw value bits, in insertion order.
  std::uint64_t checksum() const;

  bool operator==(const ParamStore& other) const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, ad::Matrix> tensors_;
};

/// Places a ParamStore on a tape by reference. Trainable tensors become
/// gradient-tracking variables; frozen ones become constants. The store must
/// outlive the tape and must not be modified while the tape is in use.
class ParamBinding {
 public:
  ParamBinding(ad::Tape& tape, const ParamStore& params, bool trainable);

  ad::Var operator[](const std::string& name) const;
  ad::Tape& tape() const { return *tape_; }

  /// Gradients of every bound tensor after tape.backward().
  ParamStore gradients() const;

 private:
  ad::Tape* tape_;
  std::vector<std::string> names_;
  std::map<std::string, ad::Var> vars_;
};

// Checkpoint layout, integers little-endian:
//   "EMOP" | u32 version | u32 tensor count |
//   per tensor: u32 name length | name bytes | u32 rank | u32 dims[rank] |
//   binary64 payload, row-major.
// Rank is 2 for every tensor written by this library. Non-numeric metadata is
// stored as small tensors under the "meta." prefix.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParamStore& params);
ParamStore decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

/// Glorot-uniform fan_in x fan_out matrix.
ad::Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, class Rng& rng);
ad::Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, class Rng& rng);
ad::Matrix scalar_tensor(double v);

}  // namespace emo
