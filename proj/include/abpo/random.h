#ifndef ABPO_RANDOM_H_
#define ABPO_RANDOM_H_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>

namespace abpo {

// All randomness flows through explicitly seeded 64-bit Mersenne Twister
// streams. Distributions are implemented here rather than taken from
// <random> so that draws are identical across standard libraries.
using Rng = std::mt19937_64;

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream from a root seed and a path of integer
// tags, e.g. DeriveStream(seed, {kLogStream, round, user_id}).
inline Rng DeriveStream(std::uint64_t seed,
                        std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = SplitMix64(seed);
  for (std::uint64_t tag : path) h = SplitMix64(h ^ SplitMix64(tag + 1));
  return Rng(h);
}

// Uniform double in [0, 1) with 53 random bits.
inline double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n), unbiased via rejection.
inline std::uint64_t UniformIndex(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = Rng::max() - Rng::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline bool Bernoulli(Rng& rng, double p) { return Uniform01(rng) < p; }

// Standard normal via Box-Muller.
inline double StandardNormal(Rng& rng) {
  double u1;
  do {
    u1 = Uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = Uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925 * u2);
}

template <typename Container>
void Shuffle(Container& c, Rng& rng) {
  for (std::size_t i = c.size(); i > 1; --i) {
    std::swap(c[i - 1], c[UniformIndex(rng, i)]);
  }
}

}  // namespace abpo

#endif  // ABPO_RANDOM_H_
