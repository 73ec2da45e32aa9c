#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace screenlab {

using RandomStream = std::mt19937_64;

// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic substream seed for (master, tag...). Each tag component is folded
// in order, so {seed, 40} and {seed, 41} give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t t : tags) h = mix64(h ^ mix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

inline RandomStream make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  return RandomStream(derive_seed(master, tags));
}

// Uniform draw on the open interval (0, 1).
inline double uniform_open(RandomStream& rng) {
  // 53 random bits, shifted off zero by half an ulp.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace screenlab
