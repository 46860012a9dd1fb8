#pragma once

#include <cmath>
#include <cstdint>

namespace odfnet {

/// SplitMix64 generator (Steele, Lea & Flood 2014). Chosen over the platform
/// engines because its output is fully specified by the seed, so golden files
/// and synthetic datasets are reproducible across compilers and platforms.
/// The floating-point helpers below are likewise hand-rolled; the standard
/// <random> distributions are implementation-defined and would break that.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n). Rejection-free modulo is fine here; the bias
  /// for our n (< 2^32) is far below anything the tests can observe.
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller (polar form avoided to keep the
  /// consumption of raw draws fixed at two per pair).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  bool next_bool() { return (next_u64() & 1u) != 0; }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Derives an independent stream seed from a base seed and a stream id.
/// Used for per-sample parallel generation (seed = base blended with index).
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  SplitMix64 mixer(base ^ (0x632be59bd9b4e019ULL * (stream + 1)));
  return mixer.next_u64();
}

}  // namespace odfnet
