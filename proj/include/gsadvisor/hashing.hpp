#pragma once

#include <bit>
#include <cstdint>
#include <string_view>

namespace gsadvisor {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = kFnvOffset) noexcept {
  for (char c : bytes) {
    state ^= static_cast<unsigned char>(c);
    state *= kFnvPrime;
  }
  return state;
}

constexpr std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t state) noexcept {
  for (int i = 0; i < 8; ++i) {
    state ^= (value >> (8 * i)) & 0xffU;
    state *= kFnvPrime;
  }
  return state;
}

// Platform-independent hasher over a sequence of fields; integers are fed little-endian.
class StableHasher {
 public:
  StableHasher& add(std::string_view s) {
    state_ = fnv1a_u64(s.size(), state_);
    state_ = fnv1a(s, state_);
    return *this;
  }
  StableHasher& add(std::uint64_t v) {
    state_ = fnv1a_u64(v, state_);
    return *this;
  }
  StableHasher& add(double v) { return add(std::bit_cast<std::uint64_t>(v)); }
  std::uint64_t digest() const noexcept { return mix64(state_); }

 private:
  std::uint64_t state_ = kFnvOffset;
};

// Seed for sample j of pair (prompt_id, scale) under a sweep's seed_base.
inline std::uint64_t sample_seed(std::uint64_t seed_base, std::string_view prompt_id, double scale,
                                 std::uint64_t sample_index) {
  return StableHasher{}.add(seed_base).add(prompt_id).add(scale).add(sample_index).digest();
}

}  // namespace gsadvisor
