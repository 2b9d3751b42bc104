// NEON backends for the row primitives.  NEON is baseline on aarch64, so no
// runtime feature check is needed; the dispatcher only references these on
// aarch64 builds.  The loops mirror the scalar reference with 2-wide lanes.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstddef>

namespace kae::simd::neon {

double dot(const double* a, const double* b, std::size_t n) noexcept {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  double sum = vaddvq_f64(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double sqdist(const double* a, const double* b, std::size_t n) noexcept {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vaddq_f64(acc, vmulq_f64(d, d));
  }
  double sum = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace kae::simd::neon

#endif  // aarch64
