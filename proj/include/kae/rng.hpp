#ifndef KAE_RNG_HPP
#define KAE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace kae {

/// Seeded random source with explicit uniform and normal transforms.
///
/// mt19937_64 output is pinned by the standard, but the <random>
/// distributions are not, so sampling through std::normal_distribution would
/// give different streams on different standard libraries.  The transforms
/// here (53-bit uniform, Box-Muller normal) make every stream a pure function
/// of the seed on any conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal draw (Box-Muller; consumes two uniforms per pair).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 == 0.0) u1 = uniform01();  // log(0) guard
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace kae

#endif  // KAE_RNG_HPP
