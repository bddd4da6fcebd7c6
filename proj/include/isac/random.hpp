#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "isac/linalg.hpp"

namespace isac {

// SplitMix64 finalizer. Used to decorrelate seeds derived from a common base.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Seed of substream `index` under `base`. Episode seeds and the per-episode
// stream seeds are both derived through this so that streams never overlap
// merely because their inputs were numerically close.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(mix64(base) + index);
}

// Deterministic random stream. All distributions are generated from the raw
// 64-bit output with fixed arithmetic, so a given seed reproduces the same
// values on any build of this library.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Standard normal via the Box-Muller transform; the paired draw is cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log() finite
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Draw from N(0, L L^T) given the lower Cholesky factor L.
inline Vector gaussian_vector(const Matrix& chol_lower, RandomStream& stream) {
  Vector z(chol_lower.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = stream.next_gaussian();
  return chol_lower * z;
}

}  // namespace isac
