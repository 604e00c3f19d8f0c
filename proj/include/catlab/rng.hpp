#pragma once

// Counter-derived random streams for reproducible simulation.
//
// Every stochastic routine in this library receives an explicit 64-bit seed
// and derives child seeds by index, so any path, any coupon date, and any
// dataset row can be regenerated in isolation.  The generator is
// xoshiro256++ with SplitMix64 state expansion: stream construction is a
// handful of integer operations, which matters when a run opens one stream
// per simulated path.
//
// Floating-point draws use fixed transforms (inversion where a closed form
// exists) rather than std::<distribution>, whose output is
// implementation-defined.  Two builds of this library on any platform
// produce bit-identical streams.

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace catlab {

namespace detail {

// SplitMix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Child seed for stream `index` under `seed`.  Distinct (seed, index)
/// pairs map to distinct child seeds for index < 2^64 - 1.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return detail::mix64(seed + 0x9e3779b97f4a7c15ULL * (index + 1));
}

/// One independent random stream.  Cheap to construct; not thread-safe.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) {
    // Expand the seed through SplitMix64 so near-equal seeds yield
    // unrelated states; all-zero state is unreachable.
    std::uint64_t z = seed;
    for (auto& word : state_) {
      z += 0x9e3779b97f4a7c15ULL;
      std::uint64_t w = z;
      w = (w ^ (w >> 30)) * 0xbf58476d1ce4e5b9ULL;
      w = (w ^ (w >> 27)) * 0x94d049bb133111ebULL;
      word = w ^ (w >> 31);
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result =
        detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1); 53-bit resolution, never 0 or 1.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi]; degenerate lo == hi returns lo exactly.
  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  /// Standard normal via Box-Muller; draws are produced in pairs and the
  /// spare is cached, so consumption order is still deterministic.
  double normal01() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) { return mean + sd * normal01(); }

  /// Exponential with the given scale (mean), by inversion.
  double exponential(double scale) { return -scale * std::log(uniform01()); }

  /// Poisson count by sequential-search inversion.  Consumes exactly one
  /// uniform per call and is monotone in `mean` pathwise, which the
  /// common-random-number sensitivity checks rely on.  Cost is O(mean);
  /// means beyond the stable range of exp(-mean) are split into chunks,
  /// preserving both properties per chunk.
  long poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
    long total = 0;
    while (mean > 500.0) {
      total += poisson_inv(500.0);
      mean -= 500.0;
    }
    return total + poisson_inv(mean);
  }

  /// Gamma(shape, scale).  shape == 1 reduces to inversion; general shape
  /// uses Marsaglia-Tsang squeeze with the shape<1 boost.
  double gamma(double shape, double scale) {
    if (shape <= 0.0 || scale <= 0.0)
      throw std::invalid_argument("gamma: shape and scale must be positive");
    if (shape == 1.0) return exponential(scale);
    if (shape < 1.0) {
      const double u = uniform01();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal01();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v * scale;
    }
  }

 private:
  long poisson_inv(double mean) {
    if (mean == 0.0) return 0;
    const double u = uniform01();
    double p = std::exp(-mean);
    double cdf = p;
    long k = 0;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (k > 2000000) throw std::runtime_error("poisson: inversion overflow");
    }
    return k;
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace catlab
