#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace spdc {

// splitmix64, used for seeding and for deriving independent per-frame streams.
inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stream seed for item `index` under `master`. Frames synthesized from
// per-frame streams are independent of the parallel schedule.
inline uint64_t stream_seed(uint64_t master, uint64_t index) {
  uint64_t s = master ^ (0x9E3779B97F4A7C15ull * (index + 1));
  return splitmix64_next(s);
}

// xoshiro256++ with explicit sampling routines, so stacks are reproducible
// bit-for-bit across platforms and library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_next(sm);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x1ull;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1]
  double next_open_double() { return 1.0 - next_double(); }

  bool next_bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return next_double() < p;
  }

  // standard normal via Box-Muller; the spare value is cached
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_open_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double next_normal(double sigma) { return sigma * next_normal(); }

  // Knuth multiplication method; adequate for the photon-flux regime
  // (means of a few). Falls back to a rounded normal for large means.
  long next_poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 100.0) {
      const double v = mean + std::sqrt(mean) * next_normal();
      return v > 0.0 ? std::lround(v) : 0;
    }
    const double limit = std::exp(-mean);
    long k = 0;
    double prod = 1.0;
    do {
      ++k;
      prod *= next_double();
    } while (prod > limit);
    return k - 1;
  }

  // Gap to the next success of a Bernoulli(p) scan (inclusive step count
  // minus one). Lets dark-count sprinkling run in O(hits) instead of
  // O(pixels) while matching independent per-pixel draws in distribution.
  long long next_geometric_gap(double p) {
    const double u = next_open_double();
    const double g = std::floor(std::log(u) / std::log1p(-p));
    if (g > 9.0e18) return 9000000000000000000ll;
    return static_cast<long long>(g);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4] = {};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace spdc
