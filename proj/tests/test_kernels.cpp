#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qhmm/kernels.hpp"
#include "qhmm/rng.hpp"

using namespace qhmm;

namespace {

double rho(double u, double tau) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

}  // namespace

TEST_CASE("check_loss_sum matches direct evaluation") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    int n = 1 + static_cast<int>(rng.below(257));
    double tau = rng.uniform(0.05, 0.95);
    std::vector<double> r(n), w(n);
    double expect_w = 0.0, expect_u = 0.0;
    for (int j = 0; j < n; ++j) {
      r[j] = rng.normal() * 3.0;
      w[j] = rng.uniform();
      expect_w += w[j] * rho(r[j], tau);
      expect_u += rho(r[j], tau);
    }
    CHECK(kernels::check_loss_sum(r.data(), w.data(), n, tau) ==
          doctest::Approx(expect_w).epsilon(1e-12));
    CHECK(kernels::check_loss_sum(r.data(), nullptr, n, tau) ==
          doctest::Approx(expect_u).epsilon(1e-12));
  }
}

TEST_CASE("ald_loglik_batch matches direct evaluation with optional offsets") {
  Rng rng(11);
  int n = 131;
  double tau = 0.3, sigma = 0.7;
  std::vector<double> y(n), a(n), b(n), c(n), out(n);
  for (int j = 0; j < n; ++j) {
    y[j] = rng.normal();
    a[j] = rng.normal();
    b[j] = rng.normal();
    c[j] = rng.normal();
  }
  kernels::ald_loglik_batch(y.data(), a.data(), b.data(), c.data(), out.data(),
                            n, sigma, tau);
  for (int j = 0; j < n; ++j) {
    double u = (y[j] - a[j] - b[j] - c[j]) / sigma;
    double expect = std::log(tau * (1.0 - tau) / sigma) - rho(u, tau);
    CHECK(out[j] == doctest::Approx(expect).epsilon(1e-13));
  }
  kernels::ald_loglik_batch(y.data(), nullptr, b.data(), nullptr, out.data(),
                            n, sigma, tau);
  for (int j = 0; j < n; ++j) {
    double u = (y[j] - b[j]) / sigma;
    double expect = std::log(tau * (1.0 - tau) / sigma) - rho(u, tau);
    CHECK(out[j] == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("simd and scalar paths agree") {
  INFO("active implementation: ", kernels::active_impl());
  Rng rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    int n = 1 + static_cast<int>(rng.below(515));
    double tau = rng.uniform(0.05, 0.95);
    double sigma = rng.uniform(0.2, 2.0);
    std::vector<double> r(n), w(n), y(n), base(n), out_simd(n), out_scalar(n);
    for (int j = 0; j < n; ++j) {
      r[j] = rng.normal() * 2.0;
      w[j] = rng.uniform();
      y[j] = rng.normal();
      base[j] = rng.normal();
    }
    kernels::set_simd_enabled(true);
    double s1 = kernels::check_loss_sum(r.data(), w.data(), n, tau);
    kernels::ald_loglik_batch(y.data(), base.data(), nullptr, nullptr,
                              out_simd.data(), n, sigma, tau);
    kernels::set_simd_enabled(false);
    double s2 = kernels::check_loss_sum(r.data(), w.data(), n, tau);
    kernels::ald_loglik_batch(y.data(), base.data(), nullptr, nullptr,
                              out_scalar.data(), n, sigma, tau);
    kernels::set_simd_enabled(true);
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
    for (int j = 0; j < n; ++j) {
      CHECK(out_simd[j] == doctest::Approx(out_scalar[j]).epsilon(1e-12));
    }
  }
}
