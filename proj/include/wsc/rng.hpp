#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace wsc {

namespace detail {
// splitmix64; used to expand and mix stream keys.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Collapse (seed, id...) into one well-mixed 64-bit sub-seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = detail::mix64(seed);
  for (std::uint64_t id : ids) h = detail::mix64(h ^ (id + 0x9e3779b97f4a7c15ULL));
  return h;
}

// pcg32 (O'Neill). Small state, cheap seeding, one independent stream per
// (seed, id...) key so sampling order never depends on scheduling.
class Rng {
 public:
  Rng() : Rng(0x853c49e6748fea9bULL, 0xda3e39cb94b95bdbULL) {}

  Rng(std::uint64_t init_state, std::uint64_t init_seq) {
    state_ = 0;
    inc_ = (init_seq << 1) | 1u;
    next_u32();
    state_ += init_state;
    next_u32();
  }

  // Derive an independent stream from a seed plus any number of ids
  // (graph id, vertex id, scale, epoch, ...). Pure function of its inputs.
  static Rng from_key(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = detail::mix64(seed);
    std::uint64_t g = seed;
    for (std::uint64_t id : ids) {
      h = detail::mix64(h ^ (id + 0x9e3779b97f4a7c15ULL));
      g = detail::mix64(g + h);
    }
    return Rng(h, g);
  }

  std::uint32_t next_u32() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  std::uint64_t next_u64() {
    std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint32_t below(std::uint32_t n) {
    return static_cast<std::uint32_t>(uniform() * n) % n;
  }

  // Standard normal via Box-Muller (one value per call; no state caching so
  // the draw count per call is fixed).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

}  // namespace wsc
