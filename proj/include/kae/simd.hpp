#ifndef KAE_SIMD_HPP
#define KAE_SIMD_HPP

#include <cassert>
#include <cstddef>
#include <span>

namespace kae::simd {

/// Scalar reference implementations.  These are the ground truth the
/// vectorized backends are tested against, and the fallback on CPUs without
/// AVX2/NEON.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
double sqdist(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

/// Dispatched entry points.  The backend is chosen once, at first use: the
/// best instruction set the CPU supports, overridable with KAE_SIMD=scalar
/// (or =avx2 / =neon, which fall back to scalar when unavailable).
double dot(const double* a, const double* b, std::size_t n) noexcept;
double sqdist(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;

/// Name of the backend the dispatcher resolved to: "scalar", "avx2", "neon".
const char* active_backend() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  assert(a.size() == b.size());
  return dot(a.data(), b.data(), a.size());
}

inline double sqdist(std::span<const double> a, std::span<const double> b) noexcept {
  assert(a.size() == b.size());
  return sqdist(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  assert(x.size() == y.size());
  axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace kae::simd

#endif  // KAE_SIMD_HPP
