#pragma once

// Seeded random streams. Each trajectory owns a stream derived from
// (seed, index), so ensembles are reproducible at any thread count.

#include <cmath>
#include <cstdint>
#include <random>

#include "qtherm/error.hpp"

namespace qtherm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : eng_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 eng_;
};

/// Exponential waiting time with rate lambda (inverse-CDF draw).
inline double sample_interval(Rng& rng, double lambda) {
  if (!(lambda > 0.0)) throw PreconditionError("sample_interval: lambda must be > 0");
  return -std::log1p(-rng.uniform()) / lambda;
}

/// Index k drawn with probability p[k]; p need only sum to ~1.
template <class Probs>
std::size_t sample_discrete(Rng& rng, const Probs& p) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < static_cast<std::size_t>(p.size()); ++k) {
    if (p[k] <= 0.0) continue;
    acc += p[k];
    last = k;
    if (u < acc) return k;
  }
  return last;
}

}  // namespace qtherm
