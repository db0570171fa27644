#pragma once

// Seedable, splittable random number generation.
//
// Streams are std::mt19937_64 engines whose seeds are derived through a
// SplitMix64 finalizer, so split(seed, i) gives statistically independent
// streams that are reproducible on every platform. Uniform doubles are built
// from the top 53 bits directly rather than through std::uniform_real_distribution,
// whose output is implementation-defined.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace fwalk {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Child stream `stream` of a parent seed; deterministic and order-free.
  static Rng split(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

/// Inverse-CDF sampler over a fixed probability vector.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(std::span<const double> probs) {
    cdf_.reserve(probs.size());
    double acc = 0.0;
    for (double p : probs) {
      acc += p;
      cdf_.push_back(acc);
    }
    for (double& c : cdf_) c /= acc;
    cdf_.back() = 1.0;
  }

  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform();
    std::size_t lo = 0, hi = cdf_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (u < cdf_[mid]) hi = mid;
      else lo = mid + 1;
    }
    return lo;
  }

  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

}  // namespace fwalk
