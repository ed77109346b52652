#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace emo {

/// Incremental 64-bit FNV-1a. Used for checksums and provenance records,
/// never for anything security related.
class Fnv1a {
 public:
  void update(std::span<const std::uint8_t> bytes);
  void update(std::string_view s);
  void update_u64(std::uint64_t v);
  void update_f64(double v);
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t splitmix64(std::uint64_t x);
std::string to_hex(std::uint64_t v);

}  // namespace emo
