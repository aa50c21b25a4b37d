#pragma once

#include <cstdint>

namespace dapdsco {

// 64-bit finalizer (splitmix64). Bijective, so distinct inputs never collide.
inline std::uint64_t mix_bits(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

enum class StreamPurpose : std::uint64_t {
  Activation = 1,
  PrimalDelay = 2,   // staleness of prices read by flow owners
  DualDelay = 3,     // staleness of flows read by price owners
  Loss = 4,
  NoiseCost = 5,
  NoiseDemand = 6,
  Init = 7,
  Generate = 8,
};

// Counter-based generator: one independent stream per (seed, purpose, agent, channel).
// A draw depends only on the stream key and how many draws that stream has taken, so
// streams never perturb one another across configurations, and per-agent draw order is
// stable no matter how agents are scheduled within a tick.
class RngStream {
 public:
  RngStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t agent = 0,
            std::uint64_t channel = 0) {
    std::uint64_t k = mix_bits(seed);
    k = mix_bits(k ^ mix_bits(static_cast<std::uint64_t>(purpose)));
    k = mix_bits(k ^ mix_bits(agent));
    k = mix_bits(k ^ mix_bits(channel));
    key_ = k;
  }

  std::uint64_t next_u64() { return mix_bits(key_ ^ (++counter_ * 0x9e3779b97f4a7c15ull)); }

  // Uniform on [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer on [0, n). Multiply-shift reduction; no modulo bias to speak of.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Consumes a draw only for nondegenerate probabilities, so p = 0 and p = 1 paths
  // leave the stream untouched.
  bool next_bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return next_unit() < p;
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace dapdsco
