#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops of the estimator. Scalar reference
// implementations plus an AVX2 variant picked at runtime; the two must agree
// to tight tolerance (equivalence-tested). Everything here is pure
// arithmetic: rho_tau(u) = max(tau*u, (tau-1)*u) needs no exp/log.

namespace qhmm::kernels {

// sum_j w[j] * rho_tau(r[j]); w == nullptr means unit weights.
double check_loss_sum(const double* r, const double* w, std::size_t n,
                      double tau);

// out[j] = log(tau*(1-tau)/sigma) - rho_tau((y[j]-a[j]-b[j]-c[j]) / sigma).
// Any of a, b, c may be nullptr (treated as zero).
void ald_loglik_batch(const double* y, const double* a, const double* b,
                      const double* c, double* out, std::size_t n,
                      double sigma, double tau);

// Name of the active implementation ("scalar" or "avx2").
const std::string& active_impl();

// Force the scalar path (tests compare both; also useful for debugging).
void set_simd_enabled(bool enabled);

namespace detail {
double check_loss_sum_scalar(const double* r, const double* w, std::size_t n,
                             double tau);
void ald_loglik_batch_scalar(const double* y, const double* a,
                             const double* b, const double* c, double* out,
                             std::size_t n, double sigma, double tau);
#if defined(QHMM_HAVE_AVX2)
double check_loss_sum_avx2(const double* r, const double* w, std::size_t n,
                           double tau);
void ald_loglik_batch_avx2(const double* y, const double* a, const double* b,
                           const double* c, double* out, std::size_t n,
                           double sigma, double tau);
#endif
}  // namespace detail

}  // namespace qhmm::kernels
