// AVX2 backends for the row primitives.  This translation unit is compiled
// with -mavx2 and must only be entered after the dispatcher has checked
// __builtin_cpu_supports("avx2").  Plain mul+add (no FMA) keeps results as
// close to the scalar reference as reassociation allows.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

namespace kae::simd::avx2 {

namespace {

inline double hsum(__m256d v) noexcept {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, v);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double sum = hsum(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double sqdist(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_add_pd(_mm256_loadu_pd(y + i),
                                    _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, t);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace kae::simd::avx2

#endif  // x86-64
