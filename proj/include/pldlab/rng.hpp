#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace pldlab {

// Deterministic PRNG (xoshiro256** seeded through splitmix64). Every random
// decision in the library flows through one of these, keyed by a named
// substream, so runs are reproducible across platforms and thread counts.
// Never use std::mt19937 or rand() anywhere in the library: their stream
// would be correct but this class is the single source of randomness.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform double in [0, 1).
  double uniform();
  // Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi], inclusive on both ends. Unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller. Caches the second value of each pair.
  double gaussian();
  // true with probability p.
  bool bernoulli(double p);

  // Derives an independent generator. The same (seed, name, index) triple
  // always yields the same stream; distinct triples are uncorrelated for
  // practical purposes. `index` disambiguates e.g. per-sample streams.
  Rng substream(std::string_view name, std::uint64_t index = 0) const;

 private:
  std::array<std::uint64_t, 4> s_;
  std::uint64_t root_;  // key used for substream derivation
  double cached_gauss_ = 0.0;
  bool has_cached_gauss_ = false;
};

// FNV-1a, used for substream derivation and content hashing in manifests.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(std::string_view s);

}  // namespace pldlab
