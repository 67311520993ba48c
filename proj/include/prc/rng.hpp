#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace prc {

// Stream-splittable deterministic RNG. Substreams are derived by mixing the
// master seed with a stream index, so replication r of scenario seed m is the
// same sequence on every platform and regardless of execution order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(mix(seed)) {}

  static RngStream derive(std::uint64_t master, std::uint64_t index) {
    return RngStream(mix(master) ^ mix(0x9E3779B97F4A7C15ULL * (index + 1)));
  }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via the polar method; draw-count varies but is fully
  // determined by the stream state.
  double normal() {
    for (;;) {
      const double u = 2.0 * uniform01() - 1.0;
      const double v = 2.0 * uniform01() - 1.0;
      const double r2 = u * u + v * v;
      if (r2 > 0.0 && r2 < 1.0) {
        return u * std::sqrt(-2.0 * std::log(r2) / r2);
      }
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 eng_;
};

}  // namespace prc
