#ifndef CSDP_RNG_HPP
#define CSDP_RNG_HPP

#include <cmath>
#include <cstdint>

namespace csdp {

// Deterministic stream RNG built on SplitMix64.
//
// The standard library engines are portable but its distributions are
// implementation-defined, which would break byte-identical transcripts across
// toolchains. Everything random in this project flows through this class, and
// each concurrently running mechanism owns its own stream derived from
// (master seed, stream id), so interleaving never shares state.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t seed) : state_(seed) {}

  // Independent-stream derivation: hashes the pair so that nearby ids and
  // seeds do not produce correlated streams.
  static StreamRng derive(std::uint64_t master_seed, std::uint64_t stream_id) {
    std::uint64_t a = mix(master_seed + 0x9E3779B97F4A7C15ull);
    std::uint64_t b = mix(stream_id + 0xD1B54A32D192ED03ull);
    return StreamRng(mix(a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2))));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix_final(state_);
  }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, bound). bound must be >= 1.
  std::uint64_t uniform_int(std::uint64_t bound) {
    // Rejection sampling over the smallest covering power of two keeps the
    // draw exactly uniform and the consumption pattern deterministic.
    std::uint64_t mask = bound - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
      std::uint64_t v = next_u64() & mask;
      if (v < bound) return v;
    }
  }

  // Standard normal via Box-Muller. Uses exactly two uniforms per call so the
  // stream position never depends on the values drawn.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    return mix_final(z);
  }
  static std::uint64_t mix_final(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace csdp

#endif  // CSDP_RNG_HPP
