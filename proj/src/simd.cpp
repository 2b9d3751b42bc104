#include "kae/simd.hpp"

#include <cstdlib>
#include <string_view>

namespace kae::simd {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double sqdist(const double* a, const double* b, std::size_t n) noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace scalar

#if KAE_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
double sqdist(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2
#endif

#if KAE_HAVE_NEON
namespace neon {
double dot(const double* a, const double* b, std::size_t n) noexcept;
double sqdist(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace neon
#endif

namespace {

struct Backend {
  const char* name;
  double (*dot)(const double*, const double*, std::size_t);
  double (*sqdist)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
};

constexpr Backend kScalar{"scalar", &scalar::dot, &scalar::sqdist, &scalar::axpy};
#if KAE_HAVE_AVX2
constexpr Backend kAvx2{"avx2", &avx2::dot, &avx2::sqdist, &avx2::axpy};
#endif
#if KAE_HAVE_NEON
constexpr Backend kNeon{"neon", &neon::dot, &neon::sqdist, &neon::axpy};
#endif

const Backend& best_supported() {
#if KAE_HAVE_AVX2
  if (__builtin_cpu_supports("avx2")) return kAvx2;
#endif
#if KAE_HAVE_NEON
  return kNeon;  // baseline on aarch64
#endif
  return kScalar;
}

const Backend& select_backend() {
  const char* env = std::getenv("KAE_SIMD");
  const std::string_view want = env ? env : "";
  if (want == "scalar") return kScalar;
#if KAE_HAVE_AVX2
  if (want == "avx2") return __builtin_cpu_supports("avx2") ? kAvx2 : kScalar;
#else
  if (want == "avx2") return kScalar;
#endif
#if KAE_HAVE_NEON
  if (want == "neon") return kNeon;
#else
  if (want == "neon") return kScalar;
#endif
  return best_supported();
}

const Backend& backend() {
  static const Backend& b = select_backend();
  return b;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) noexcept {
  return backend().dot(a, b, n);
}

double sqdist(const double* a, const double* b, std::size_t n) noexcept {
  return backend().sqdist(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  backend().axpy(alpha, x, y, n);
}

const char* active_backend() noexcept { return backend().name; }

}  // namespace kae::simd
