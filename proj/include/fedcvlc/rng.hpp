#pragma once

#include <cstdint>

namespace fedcvlc {

// SplitMix64 finalizer. Used to derive independent stream keys from
// (seed, round, client, packet) tuples and as a counter-based generator.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t salt) noexcept {
  return mix64(key ^ mix64(salt + 0x632be59bd9b4e019ULL));
}

// Stateless generator: draw i of stream `key` is a pure function of (key, i),
// so any element of a block can be quantized independently.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key_ ^ mix64(counter));
  }

  // Uniform on [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
};

}  // namespace fedcvlc
