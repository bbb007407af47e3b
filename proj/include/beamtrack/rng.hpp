// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_RNG_HPP
#define BEAMTRACK_RNG_HPP

#include <cmath>
#include <cstdint>

#include "beamtrack/types.hpp"

namespace beamtrack {

/// Counter-based deterministic generator (splitmix64 core).
///
/// All randomness in the library flows through this class instead of
/// <random> distributions, whose output is implementation-defined.  The
/// same seed therefore yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  Scalar uniform() { return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53; }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const auto wide = static_cast<unsigned __int128>(next_u64()) * range;
    return lo + static_cast<int>(wide >> 64);
  }

  /// Standard normal via Box-Muller; the second draw of each pair is cached.
  Scalar normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const Scalar u1 = 1.0 - uniform();  // (0, 1]
    const Scalar u2 = uniform();
    const Scalar r = std::sqrt(-2.0 * std::log(u1));
    const Scalar theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  /// Circularly-symmetric complex Gaussian with E|z|^2 = sigma^2.
  Complex normal_complex(Scalar sigma) {
    const Scalar s = sigma * M_SQRT1_2;
    return {s * normal(), s * normal()};
  }

  /// Stateless seed derivation for independent substreams.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    Rng g(seed ^ (0xA24BAED4963EE407ull * (stream + 1)));
    return g.next_u64();
  }

 private:
  std::uint64_t state_;
  Scalar cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace beamtrack

#endif
