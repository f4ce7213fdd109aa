#pragma once

#include <cstdint>
#include <random>

#include "mcx/stats.hpp"

namespace mcx {

namespace detail {

// splitmix64 finalizer, used for seed mixing only.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic random stream. Uniform and normal variates are generated from
// the raw 64-bit output of std::mt19937_64 (whose sequence is fully specified
// by the standard), so identical seeds give identical draws on any platform.
//
// Substreams are derived from the stream's *seed*, not from its current state,
// so substream(k) is reproducible no matter how many draws were consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t raw() { return gen_(); }

  // Uniform on (0, 1), 53-bit resolution, never returns 0 or 1.
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  // Standard normal via inverse CDF; keeps the draw count at one uniform
  // per variate, which makes substream accounting straightforward.
  double normal() { return normal_quantile(uniform()); }

  // Independent stream labelled (a, b) derived from this stream's seed.
  Rng substream(std::uint64_t a, std::uint64_t b = 0) const {
    std::uint64_t s = detail::mix64(seed_ ^ detail::mix64(a));
    s = detail::mix64(s ^ detail::mix64(b ^ 0x5851f42d4c957f2dULL));
    return Rng(s);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace mcx
