#include "ssdet/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ssdet {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t mix_seed(std::initializer_list<uint64_t> tags) {
  uint64_t h = 0x8f1bbcdcbfa53e0bULL;
  for (uint64_t t : tags) h = splitmix64(h ^ splitmix64(t));
  return h;
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  // Multiply-shift rejection-free mapping is fine here; n is tiny relative
  // to 2^53 so modulo bias is negligible, but use the exact method anyway.
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return static_cast<int>(v % un);
}

double Rng::normal() {
  // Box-Muller, discarding the second variate.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ssdet
