#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace stpp {

namespace detail {
inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Deterministic generator with keyed sub-streams. Sub-streams are derived from
// the construction seed, not the current state, so parallel work items can own
// independent streams regardless of draw order.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), state_(seed) {}

  static uint64_t derive(uint64_t seed, uint64_t key) {
    uint64_t x = seed;
    uint64_t a = detail::splitmix64(x);
    x = a ^ (key * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
    detail::splitmix64(x);
    return detail::splitmix64(x);
  }

  Rng stream(uint64_t key) const { return Rng(derive(seed_, key)); }
  Rng stream(uint64_t k1, uint64_t k2) const { return Rng(derive(derive(seed_, k1), k2)); }
  Rng stream(uint64_t k1, uint64_t k2, uint64_t k3) const {
    return Rng(derive(derive(derive(seed_, k1), k2), k3));
  }

  uint64_t seed() const { return seed_; }

  uint64_t next() { return detail::splitmix64(state_); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n); negligible (2^-64) modulo bias via 128-bit multiply.
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(next()) * n) >> 64);
  }

  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Exact Poisson sampling by multiplicative inversion; large means are split
  // into chunks so the running product never underflows.
  long poisson(double mean) {
    if (!(mean > 0)) return 0;
    long total = 0;
    while (mean > 500.0) {
      total += poisson_small(500.0);
      mean -= 500.0;
    }
    return total + poisson_small(mean);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // In-place Fisher-Yates over an index range of a vector.
  template <typename T>
  void shuffle_range(std::vector<T>& v, size_t begin, size_t end) {
    for (size_t i = end - begin; i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[begin + i - 1], v[begin + j]);
    }
  }

 private:
  long poisson_small(double mean) {
    const double limit = std::exp(-mean);
    long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  uint64_t seed_;
  uint64_t state_;
};

}  // namespace stpp
