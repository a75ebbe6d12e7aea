#include "qhmm/kernels.hpp"

#include <atomic>
#include <cmath>

namespace qhmm::kernels {

namespace detail {

double check_loss_sum_scalar(const double* r, const double* w, std::size_t n,
                             double tau) {
  double acc = 0.0;
  if (w == nullptr) {
    for (std::size_t j = 0; j < n; ++j) {
      double u = r[j];
      acc += std::max(tau * u, (tau - 1.0) * u);
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      double u = r[j];
      acc += w[j] * std::max(tau * u, (tau - 1.0) * u);
    }
  }
  return acc;
}

void ald_loglik_batch_scalar(const double* y, const double* a,
                             const double* b, const double* c, double* out,
                             std::size_t n, double sigma, double tau) {
  const double lognorm = std::log(tau * (1.0 - tau) / sigma);
  const double inv_sigma = 1.0 / sigma;
  for (std::size_t j = 0; j < n; ++j) {
    double u = y[j];
    if (a) u -= a[j];
    if (b) u -= b[j];
    if (c) u -= c[j];
    u *= inv_sigma;
    out[j] = lognorm - std::max(tau * u, (tau - 1.0) * u);
  }
}

}  // namespace detail

namespace {

struct Dispatch {
  double (*check_loss_sum)(const double*, const double*, std::size_t, double);
  void (*ald_loglik_batch)(const double*, const double*, const double*,
                           const double*, double*, std::size_t, double,
                           double);
  const char* name;
};

constexpr Dispatch kScalar = {&detail::check_loss_sum_scalar,
                              &detail::ald_loglik_batch_scalar, "scalar"};
#if defined(QHMM_HAVE_AVX2)
constexpr Dispatch kAvx2 = {&detail::check_loss_sum_avx2,
                            &detail::ald_loglik_batch_avx2, "avx2"};
#endif

const Dispatch* detect() {
#if defined(QHMM_HAVE_AVX2)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return &kAvx2;
  }
#endif
  return &kScalar;
}

std::atomic<const Dispatch*> g_active{nullptr};

const Dispatch* active() {
  const Dispatch* d = g_active.load(std::memory_order_acquire);
  if (d == nullptr) {
    d = detect();
    g_active.store(d, std::memory_order_release);
  }
  return d;
}

}  // namespace

double check_loss_sum(const double* r, const double* w, std::size_t n,
                      double tau) {
  return active()->check_loss_sum(r, w, n, tau);
}

void ald_loglik_batch(const double* y, const double* a, const double* b,
                      const double* c, double* out, std::size_t n,
                      double sigma, double tau) {
  active()->ald_loglik_batch(y, a, b, c, out, n, sigma, tau);
}

const std::string& active_impl() {
  static thread_local std::string name;
  name = active()->name;
  return name;
}

void set_simd_enabled(bool enabled) {
  g_active.store(enabled ? detect() : &kScalar, std::memory_order_release);
}

}  // namespace qhmm::kernels
