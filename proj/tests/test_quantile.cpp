#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qhmm/errors.hpp"
#include "qhmm/quantile.hpp"
#include "qhmm/rng.hpp"
#include "support/oracles.hpp"

using namespace qhmm;

TEST_CASE("check loss: pinned values and reflection symmetry") {
  CHECK(check_loss(0.0, 0.25) == 0.0);
  CHECK(check_loss(4.0, 0.25) == doctest::Approx(1.0));
  CHECK(check_loss(-4.0, 0.25) == doctest::Approx(3.0));
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    double u = rng.normal() * 4.0;
    double tau = rng.uniform(0.01, 0.99);
    CHECK(check_loss(u, tau) ==
          doctest::Approx(check_loss(-u, 1.0 - tau)).epsilon(1e-14));
    CHECK(check_loss(u, tau) >= 0.0);
  }
}

TEST_CASE("ALD log density: pinned values at tau = 1/2") {
  CHECK(ald_logdensity(1.0, 1.0, 1.0, 0.5) ==
        doctest::Approx(std::log(0.25)).epsilon(1e-12));
  CHECK(ald_logdensity(2.0, 1.0, 1.0, 0.5) ==
        doctest::Approx(std::log(0.25) - 0.5).epsilon(1e-12));
  CHECK_THROWS_AS(ald_logdensity(0.0, 0.0, 0.0, 0.5), Error);
  CHECK_THROWS_AS(ald_logdensity(0.0, 0.0, -1.0, 0.5), Error);
}

TEST_CASE("ALD density integrates to one (trapezoid oracle)") {
  // mu +- 40 sigma covers the tails at tau = 1/2; for asymmetric tau the
  // slow tail decays like exp(-min(tau,1-tau) u / sigma), so widen by it
  for (double tau : {0.1, 0.5, 0.8}) {
    for (double sigma : {0.5, 1.0, 2.0}) {
      double mu = 0.7;
      double reach = 40.0 * sigma / std::min(tau, 1.0 - tau) * 0.5;
      if (tau == 0.5) reach = 40.0 * sigma;
      double integral = testing::trapezoid(
          [&](double y) { return std::exp(ald_logdensity(y, mu, sigma, tau)); },
          mu - reach, mu + reach, 400000);
      CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("ALD log density is maximized over mu at mu = y") {
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    double y = rng.normal() * 2.0;
    double sigma = rng.uniform(0.3, 2.0);
    double tau = rng.uniform(0.1, 0.9);
    double at_y = ald_logdensity(y, y, sigma, tau);
    for (int k = 0; k < 10; ++k) {
      double mu = y + rng.normal();
      CHECK(ald_logdensity(y, mu, sigma, tau) <= at_y + 1e-12);
    }
  }
}

TEST_CASE("weighted quantile: pinned examples") {
  CHECK(weighted_quantile_scalar({1, 2, 3}, {1, 1, 1}, 0.5) == 2.0);
  CHECK(weighted_quantile_scalar({5}, {0.3}, 0.9) == 5.0);
  CHECK_THROWS_AS(weighted_quantile_scalar({1, 2}, {0, 0}, 0.5), Error);
}

TEST_CASE("weighted quantile minimizes the weighted check loss (enumeration)") {
  // {1,2,3} with weights {10,1,1} at the median
  std::vector<double> r = {1, 2, 3}, w = {10, 1, 1};
  auto objective = [&](double a) {
    double acc = 0.0;
    for (int j = 0; j < 3; ++j) acc += w[j] * check_loss(r[j] - a, 0.5);
    return acc;
  };
  double argmin = weighted_quantile_scalar(r, w, 0.5);
  CHECK(argmin == 1.0);
  for (double cand : r) {
    CHECK(objective(argmin) <= objective(cand) + 1e-12);
  }

  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    int n = 1 + static_cast<int>(rng.below(12));
    double tau = rng.uniform(0.05, 0.95);
    std::vector<double> res(n), wt(n);
    for (int j = 0; j < n; ++j) {
      res[j] = rng.normal();
      wt[j] = rng.uniform(0.01, 2.0);
    }
    double q = weighted_quantile_scalar(res, wt, tau);
    double obj_q = 0.0;
    for (int j = 0; j < n; ++j) obj_q += wt[j] * check_loss(res[j] - q, tau);
    for (double cand : res) {  // the minimizer set includes a data point
      double obj = 0.0;
      for (int j = 0; j < n; ++j) obj += wt[j] * check_loss(res[j] - cand, tau);
      CHECK(obj_q <= obj + 1e-10);
    }
  }
}

namespace {

struct RandomQr {
  Eigen::MatrixXd X;
  Eigen::VectorXd y, w;
  double tau;
};

RandomQr random_qr(Rng& rng, int n_max = 50, int p_max = 3) {
  RandomQr prob;
  int n = 5 + static_cast<int>(rng.below(n_max - 4));
  int p = 1 + static_cast<int>(rng.below(p_max));
  prob.X.resize(n, p);
  prob.y.resize(n);
  prob.w.resize(n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < p; ++k) {
      prob.X(j, k) = k == 0 ? 1.0 : rng.normal();
    }
    prob.y[j] = rng.normal() * 2.0 + prob.X.row(j).sum();
    prob.w[j] = rng.uniform(0.05, 3.0);
  }
  prob.tau = rng.uniform(0.1, 0.9);
  return prob;
}

}  // namespace

TEST_CASE("weighted_qr: intercept-only reduces to the weighted quantile") {
  Rng rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    int n = 3 + static_cast<int>(rng.below(20));
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
    Eigen::VectorXd y(n), w(n);
    std::vector<double> res(n), wt(n);
    for (int j = 0; j < n; ++j) {
      y[j] = res[j] = rng.normal();
      w[j] = wt[j] = rng.uniform(0.1, 2.0);
    }
    double tau = rng.uniform(0.1, 0.9);
    Eigen::VectorXd coef = weighted_qr(X, y, w, tau);
    CHECK(coef[0] ==
          doctest::Approx(weighted_quantile_scalar(res, wt, tau)).epsilon(1e-12));
  }
}

TEST_CASE("weighted_qr: exact interpolation recovers y = 2x") {
  Eigen::MatrixXd X(6, 2);
  Eigen::VectorXd y(6), w = Eigen::VectorXd::Ones(6);
  for (int j = 0; j < 6; ++j) {
    X(j, 0) = 1.0;
    X(j, 1) = j - 2.5;
    y[j] = 2.0 * X(j, 1);
  }
  for (double tau : {0.25, 0.5, 0.75}) {
    Eigen::VectorXd coef = weighted_qr(X, y, w, tau);
    CHECK(coef[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(coef[1] == doctest::Approx(2.0).epsilon(1e-9));
  }
}

TEST_CASE("weighted_qr IRLS path matches the LP oracle on 200 random problems") {
  Rng rng(23);
  QrOptions irls_only;
  irls_only.solver = QrSolver::kIrls;
  for (int rep = 0; rep < 200; ++rep) {
    RandomQr prob = random_qr(rng);
    Eigen::VectorXd coef_irls =
        weighted_qr(prob.X, prob.y, prob.w, prob.tau, irls_only);
    Eigen::VectorXd coef_lp =
        weighted_qr_lp_oracle(prob.X, prob.y, prob.w, prob.tau);
    double o_irls = qr_objective(prob.X, prob.y, prob.w, prob.tau, coef_irls);
    double o_lp = qr_objective(prob.X, prob.y, prob.w, prob.tau, coef_lp);
    CHECK(o_lp <= o_irls + 1e-9 * (1.0 + o_irls));  // LP is the certified min
    CHECK(o_irls <= o_lp + 1e-6 * (1.0 + std::abs(o_lp)));
  }
}

TEST_CASE("LP oracle: zero-weight rows are inert; duplication equals doubling") {
  Rng rng(29);
  for (int rep = 0; rep < 20; ++rep) {
    RandomQr prob = random_qr(rng, 20, 2);
    Eigen::VectorXd base = weighted_qr_lp_oracle(prob.X, prob.y, prob.w, prob.tau);

    // append a zero-weight row
    int n = static_cast<int>(prob.X.rows());
    Eigen::MatrixXd X2(n + 1, prob.X.cols());
    Eigen::VectorXd y2(n + 1), w2(n + 1);
    X2 << prob.X, Eigen::RowVectorXd::Ones(prob.X.cols());
    y2 << prob.y, 123.0;
    w2 << prob.w, 0.0;
    Eigen::VectorXd with_zero = weighted_qr_lp_oracle(X2, y2, w2, prob.tau);
    CHECK(qr_objective(prob.X, prob.y, prob.w, prob.tau, with_zero) ==
          doctest::Approx(qr_objective(prob.X, prob.y, prob.w, prob.tau, base))
              .epsilon(1e-9));

    // duplicating the first observation == doubling its weight
    Eigen::MatrixXd X3(n + 1, prob.X.cols());
    Eigen::VectorXd y3(n + 1), w3(n + 1);
    X3 << prob.X, prob.X.row(0);
    y3 << prob.y, prob.y[0];
    w3 << prob.w, prob.w[0];
    Eigen::VectorXd dup = weighted_qr_lp_oracle(X3, y3, w3, prob.tau);
    Eigen::VectorXd dbl_w = prob.w;
    dbl_w[0] *= 2.0;
    Eigen::VectorXd dbl = weighted_qr_lp_oracle(prob.X, prob.y, dbl_w, prob.tau);
    CHECK(qr_objective(prob.X, prob.y, dbl_w, prob.tau, dup) ==
          doctest::Approx(qr_objective(prob.X, prob.y, dbl_w, prob.tau, dbl))
              .epsilon(1e-9));
  }
}

TEST_CASE("weighted_qr objective never exceeds the zero-vector objective") {
  Rng rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    RandomQr prob = random_qr(rng);
    Eigen::VectorXd coef = weighted_qr(prob.X, prob.y, prob.w, prob.tau);
    double at_zero = qr_objective(prob.X, prob.y, prob.w, prob.tau,
                                  Eigen::VectorXd::Zero(prob.X.cols()));
    CHECK(qr_objective(prob.X, prob.y, prob.w, prob.tau, coef) <=
          at_zero + 1e-10);
  }
}

TEST_CASE("scaling all weights leaves the minimizer unchanged") {
  Rng rng(37);
  for (int rep = 0; rep < 25; ++rep) {
    RandomQr prob = random_qr(rng);
    Eigen::VectorXd coef = weighted_qr(prob.X, prob.y, prob.w, prob.tau);
    Eigen::VectorXd scaled = weighted_qr(prob.X, prob.y, 7.5 * prob.w, prob.tau);
    double o1 = qr_objective(prob.X, prob.y, prob.w, prob.tau, coef);
    double o2 = qr_objective(prob.X, prob.y, prob.w, prob.tau, scaled);
    CHECK(o2 == doctest::Approx(o1).epsilon(1e-8));
    for (int k = 0; k < coef.size(); ++k) {
      CHECK(scaled[k] == doctest::Approx(coef[k]).epsilon(1e-6));
    }
  }
}

TEST_CASE("rank-deficient designs are rejected") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 2, 2, 4, 3, 6, 4, 8;  // second column is 2x the first
  Eigen::VectorXd y(4), w = Eigen::VectorXd::Ones(4);
  y << 1, 2, 3, 4;
  try {
    weighted_qr(X, y, w, 0.5);
    FAIL("expected RankDeficientDesign");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficientDesign);
  }
}
