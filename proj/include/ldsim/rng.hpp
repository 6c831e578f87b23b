#pragma once

#include <cmath>
#include <cstdint>

namespace ldsim {

// All randomness in the library flows through this generator so that runs
// are reproducible bit for bit across platforms and compilers.  The engine
// is SplitMix64 (Steele, Lea, Flood 2014): 8 bytes of state, full period
// 2^64, and cheap enough to keep one instance per Poisson event stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Exponential with unit rate; strictly positive.
  double exponential() { return -std::log1p(-uniform01()); }

  // Standard normal via Box-Muller.  Consumes exactly two uniforms per
  // draw (no caching) so the draw count per call site is fixed.
  double normal() {
    const double u = 1.0 - uniform01();  // (0,1]
    const double v = uniform01();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
  }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Multiply-shift; bias is < 2^-64 per draw, irrelevant at our scales.
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

// Seed-splitting scheme.
//
// Independent substreams are derived from a master seed by folding fixed
// 64-bit tags through the SplitMix64 finalizer.  The tag layout used across
// the library is
//
//   derive(master, kReplica, r)                 per-replica seed
//   derive(replica, kNeutralStream, i, j)       neutral stream L_{ij}
//   derive(replica, kPotentialStream, lvl, m)   potential stream K_lvl, mark m
//   derive(replica, kMassNoise, cell)           Brownian increment of grid cell
//   derive(replica, kInitTypes)                 i.i.d. initial type vector
//   derive(replica, kDirectNoise)               direct-SDE Gaussian increments
//   derive(master, kResample, s)                genealogy resampling draws
//
// Stream tags do not involve the number of levels, so runs at different n
// share the randomness of their common streams (common random numbers).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace seed_tag {
inline constexpr std::uint64_t kReplica = 1;
inline constexpr std::uint64_t kNeutralStream = 2;
inline constexpr std::uint64_t kPotentialStream = 3;
inline constexpr std::uint64_t kMassNoise = 4;
inline constexpr std::uint64_t kInitTypes = 5;
inline constexpr std::uint64_t kDirectNoise = 6;
inline constexpr std::uint64_t kResample = 7;
inline constexpr std::uint64_t kEvents = 8;
}  // namespace seed_tag

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) {
  return mix64(seed + 0x9e3779b97f4a7c15ull * (a + 1));
}
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
  return derive_seed(derive_seed(seed, a, b), c);
}

}  // namespace ldsim
