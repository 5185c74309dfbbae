#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace splitfolio::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed derivation: the seed of stream `stream`, item `counter`
/// depends only on its coordinates, so parallel and sequential runs agree.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter) {
  return splitmix64(splitmix64(master ^ splitmix64(stream)) + counter);
}

using Rng = std::mt19937_64;

// std::uniform_int_distribution is implementation-defined; this is not.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

inline double uniform01(Rng& rng) {
  // 53 random bits in (0, 1)
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Box-Muller; avoids the implementation-defined std::normal_distribution.
class NormalSource {
 public:
  double operator()(Rng& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// First `k` entries of a partial Fisher-Yates shuffle of `pool`.
template <class T>
std::vector<T> sample_without_replacement(std::span<const T> pool, std::size_t k, Rng& rng) {
  std::vector<T> work(pool.begin(), pool.end());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, work.size() - i);
    std::swap(work[i], work[j]);
  }
  work.resize(k);
  return work;
}

}  // namespace splitfolio::detail
