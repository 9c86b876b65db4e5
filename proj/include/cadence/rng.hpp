#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cadence {

/// All randomness in the toolkit flows through this wrapper around
/// std::mt19937_64. The distribution transforms live here (not in <random>)
/// so that a fixed (seed, call sequence) yields the same stream on every
/// standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) built from the top 53 bits.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

  /// Box-Muller transform; consumes two uniforms per draw.
  double normal(double mean, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

/// Derives a per-component seed from one master seed by hashing the component
/// name and index with 64-bit FNV-1a and mixing in the master seed. Every
/// seeded stage of a run pulls its seed through this, so one experiment seed
/// pins the whole pipeline.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index = 0);

}  // namespace cadence
