#include "cadence/rng.hpp"

#include <cmath>

namespace cadence {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Rejection sampling over the largest multiple of n below 2^64.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal(double mean, double stddev) {
  // 1 - uniform01() keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index) {
  std::uint64_t h = 14695981039346656037ull;  // FNV offset basis
  auto mix = [&h](std::uint64_t byte) {
    h ^= byte & 0xff;
    h *= 1099511628211ull;  // FNV prime
  };
  for (char c : component) mix(static_cast<std::uint64_t>(c));
  for (int i = 0; i < 8; ++i) mix(index >> (8 * i));
  for (int i = 0; i < 8; ++i) mix(master >> (8 * i));
  // Final avalanche (splitmix64 tail) so nearby indices decorrelate.
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

}  // namespace cadence
