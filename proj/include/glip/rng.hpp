#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace glip {

// Counter-based random streams. A stream is identified by a 4-word key
// (seed, w0, w1, w2); the generator state is derived from the key by
// hashing, so a stream's output depends only on its key, never on how
// many other streams exist or in which order they are consumed. This is
// what makes replicate-level parallelism reproducible.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t w0 = 0,
                     std::uint64_t w1 = 0, std::uint64_t w2 = 0)
      : key_{seed, w0, w1, w2} {
    reseed();
  }

  // Derives an independent child stream from this stream's key and a tag.
  RngStream fork(std::uint64_t tag) const {
    std::uint64_t s = key_[0];
    std::uint64_t a = mix(s ^ key_[1]);
    std::uint64_t b = mix(a ^ key_[2]);
    std::uint64_t c = mix(b ^ key_[3]);
    std::uint64_t d = mix(c ^ (tag * 0x9e3779b97f4a7c15ULL + 0x5851f42d4c957f2dULL));
    return RngStream(mix(d), mix(d ^ a), mix(d ^ b), mix(d ^ c));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
    return -std::log(uniform()) / rate;
  }

  // Exact Poisson sampler: inversion for small means, transformed rejection
  // (Hormann) for large means. Means above kMaxPoissonMean are refused.
  std::int64_t poisson(double mean) {
    if (mean < 0.0 || !std::isfinite(mean))
      throw std::invalid_argument("poisson: mean must be finite and nonnegative");
    if (mean == 0.0) return 0;
    if (mean > kMaxPoissonMean)
      throw std::domain_error("poisson: mean exceeds exact-sampler range (1e7)");
    if (mean < 10.0) return poisson_inversion(mean);
    return poisson_ptrs(mean);
  }

  // Marsaglia-Tsang gamma sampler (exact).
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw std::invalid_argument("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  static constexpr double kMaxPoissonMean = 1e7;

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  void reseed() {
    std::uint64_t s = key_[0];
    s = mix(s ^ key_[1]);
    s = mix(s ^ key_[2]);
    s = mix(s ^ key_[3]);
    for (auto& w : s_) w = (s = mix(s));
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // xoshiro forbids all-zero
  }

  std::int64_t poisson_inversion(double mean) {
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::int64_t poisson_ptrs(double mean) {
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          k * loglam - mean - std::lgamma(k + 1.0))
        return static_cast<std::int64_t>(k);
    }
  }

  std::array<std::uint64_t, 4> key_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace glip
