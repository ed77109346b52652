#include "emo/hash.hpp"

#include <bit>
#include <cstdio>

namespace emo {

namespace {
constexpr std::uint64_t kPrime = 0x100000001b3ULL;
}

void Fnv1a::update(std::span<const std::uint8_t> bytes) {
  for (std::uint8_t b : bytes) {
    state_ ^= b;
    state_ *= kPrime;
  }
}

void Fnv1a::update(std::string_view s) {
  update(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

void Fnv1a::update_u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    state_ ^= static_cast<std::uint8_t>(v >> (8 * i));
    state_ *= kPrime;
  }
}

void Fnv1a::update_f64(double v) { update_u64(std::bit_cast<std::uint64_t>(v)); }

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  Fnv1a h;
  h.update(bytes);
  return h.digest();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace emo
