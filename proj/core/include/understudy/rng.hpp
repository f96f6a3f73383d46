#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace understudy {

/// Seeded random stream used everywhere randomness is consumed.
///
/// Wraps std::mt19937_64 with its own uniform helpers so that sampled
/// values are identical across standard library implementations (the
/// std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Independent stream keyed by a name and up to two integer tags.
  /// Streams with different keys never share state, so adding a consumer
  /// cannot shift the values another consumer sees.
  static Rng stream(std::uint64_t master_seed, std::string_view name,
                    std::uint64_t tag_a = 0, std::uint64_t tag_b = 0);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Index drawn from a discrete distribution given by (unnormalized)
  /// non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

  /// Uniformly chosen subset of {0..n-1} of size m, returned sorted.
  std::vector<std::size_t> subset(std::size_t n, std::size_t m);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive stream seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace understudy
