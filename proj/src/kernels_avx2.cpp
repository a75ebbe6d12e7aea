// AVX2/FMA variants of the hot loops. Compiled with -mavx2 -mfma in its own
// TU; only ever called after the runtime cpuid check in kernels.cpp.

#include "qhmm/kernels.hpp"

#if defined(QHMM_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

namespace qhmm::kernels::detail {

namespace {

// rho_tau(u) = max(tau*u, (tau-1)*u), vectorized over 4 lanes
inline __m256d rho_tau4(__m256d u, __m256d tau, __m256d taum1) {
  return _mm256_max_pd(_mm256_mul_pd(tau, u), _mm256_mul_pd(taum1, u));
}

}  // namespace

double check_loss_sum_avx2(const double* r, const double* w, std::size_t n,
                           double tau) {
  const __m256d vt = _mm256_set1_pd(tau);
  const __m256d vt1 = _mm256_set1_pd(tau - 1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  if (w == nullptr) {
    for (; j + 4 <= n; j += 4) {
      __m256d u = _mm256_loadu_pd(r + j);
      acc = _mm256_add_pd(acc, rho_tau4(u, vt, vt1));
    }
  } else {
    for (; j + 4 <= n; j += 4) {
      __m256d u = _mm256_loadu_pd(r + j);
      __m256d ww = _mm256_loadu_pd(w + j);
      acc = _mm256_fmadd_pd(ww, rho_tau4(u, vt, vt1), acc);
    }
  }
  // fixed-order horizontal reduction: (0+2) + (1+3)
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d sum2 = _mm_add_pd(lo, hi);
  double total = _mm_cvtsd_f64(sum2) + _mm_cvtsd_f64(_mm_unpackhi_pd(sum2, sum2));
  for (; j < n; ++j) {
    double u = r[j];
    double rho = std::max(tau * u, (tau - 1.0) * u);
    total += (w == nullptr) ? rho : w[j] * rho;
  }
  return total;
}

void ald_loglik_batch_avx2(const double* y, const double* a, const double* b,
                           const double* c, double* out, std::size_t n,
                           double sigma, double tau) {
  const double lognorm = std::log(tau * (1.0 - tau) / sigma);
  const double inv_sigma = 1.0 / sigma;
  const __m256d vt = _mm256_set1_pd(tau);
  const __m256d vt1 = _mm256_set1_pd(tau - 1.0);
  const __m256d vln = _mm256_set1_pd(lognorm);
  const __m256d vis = _mm256_set1_pd(inv_sigma);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d u = _mm256_loadu_pd(y + j);
    if (a) u = _mm256_sub_pd(u, _mm256_loadu_pd(a + j));
    if (b) u = _mm256_sub_pd(u, _mm256_loadu_pd(b + j));
    if (c) u = _mm256_sub_pd(u, _mm256_loadu_pd(c + j));
    u = _mm256_mul_pd(u, vis);
    _mm256_storeu_pd(out + j, _mm256_sub_pd(vln, rho_tau4(u, vt, vt1)));
  }
  for (; j < n; ++j) {
    double u = y[j];
    if (a) u -= a[j];
    if (b) u -= b[j];
    if (c) u -= c[j];
    u *= inv_sigma;
    out[j] = lognorm - std::max(tau * u, (tau - 1.0) * u);
  }
}

}  // namespace qhmm::kernels::detail

#endif  // QHMM_HAVE_AVX2
