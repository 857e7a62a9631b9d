#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ssdet {

/// Mixes a list of 64-bit tags into one stream seed (splitmix64 finalizer).
uint64_t mix_seed(std::initializer_list<uint64_t> tags);

/// Deterministic random stream.
///
/// All variates are derived from raw mt19937_64 output instead of the
/// standard distribution objects, so a stream produces the same sequence on
/// every standard library and carries no hidden distribution state. Streams
/// for independent work items (images, iterations, batch slots) are derived
/// by seed mixing, never by sharing one engine across items.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  int uniform_int(int n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller. Uses two uniforms per call; nothing is
  /// cached, so interleaving with other draws stays reproducible.
  double normal();

  /// Independent stream derived from this stream's seed and a tag. Does not
  /// consume from or depend on the parent's position.
  Rng fork(uint64_t tag) const { return Rng(mix_seed({seed_, tag})); }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace ssdet
