#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cgnf {

/// Deterministic random stream. Wraps std::mt19937_64 (whose output sequence
/// is pinned by the standard) and applies only hand-written transforms, so a
/// given seed yields the same draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1); never returns 0 (safe for log / inverse CDFs).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via the inverse CDF (one engine draw per variate).
  double normal() { return normal_quantile(uniform_open()); }

  std::uint64_t next_u64() { return engine_(); }

  /// Child stream for an independent purpose; mixes the tag into this
  /// stream's seed, so sibling and chained streams do not collide.
  Rng derive(std::uint64_t tag) const {
    return Rng(splitmix(seed_ ^ splitmix(tag)));
  }
  Rng derive(std::string_view name) const { return derive(fnv1a(name)); }

  std::uint64_t seed() const { return seed_; }

  /// Inverse standard normal CDF (Wichura's PPND16 rational approximation;
  /// absolute error below 1e-15 over (0,1)).
  static double normal_quantile(double p);

  static std::uint64_t splitmix(std::uint64_t x);
  static std::uint64_t fnv1a(std::string_view s);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace cgnf
