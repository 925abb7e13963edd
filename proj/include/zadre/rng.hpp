#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "zadre/errors.hpp"

namespace zadre {

/// One round of splitmix64; used to decorrelate derived seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d4a2ca9da867b3ULL;
  return x ^ (x >> 31);
}

/// Deterministic substream seed from a master seed and a stream name.
/// Different names yield decorrelated streams; the same (seed, name) pair
/// always yields the same substream.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master ^ h));
}

/// Indexed substream, for per-tree seeds and similar.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t index) {
  return splitmix64(derive_seed(master, stream) ^ splitmix64(index + 0x51ed2701a2b5f4e3ULL));
}

/// Deterministic random source built on mt19937_64.
///
/// All samplers are implemented here rather than through std::*_distribution
/// so that streams are bit-reproducible across standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on (0, 1); 53-bit mantissa, never exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw DomainError("Rng::uniform_index: n must be positive");
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  /// Standard normal via Box-Muller; the second deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::acos(-1.0) * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape < 1 handled by boosting.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw DomainError("Rng::gamma: shape must be > 0");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Inverse Gaussian(mu, lambda) via the Michael-Schucany-Haas transform.
  double inverse_gaussian(double mu, double lambda) {
    if (!(mu > 0.0) || !(lambda > 0.0)) {
      throw DomainError("Rng::inverse_gaussian: mu and lambda must be > 0");
    }
    const double z = normal();
    const double w = z * z;
    const double x = mu + (mu * mu * w) / (2.0 * lambda) -
                     (mu / (2.0 * lambda)) *
                         std::sqrt(4.0 * mu * lambda * w + mu * mu * w * w);
    const double u = uniform();
    if (u <= mu / (mu + x)) return x;
    return mu * mu / x;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace zadre
