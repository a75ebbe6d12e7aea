#pragma once

#include <Eigen/Dense>
#include <vector>

namespace qhmm {

// rho_tau(u) = u * (tau - 1{u<0}); the asymmetric absolute loss whose
// minimizer is the tau-th quantile.
inline double check_loss(double u, double tau) {
  return u >= 0.0 ? tau * u : (tau - 1.0) * u;
}

// log density of the asymmetric Laplace working likelihood:
// log[tau(1-tau)/sigma] - rho_tau((y-mu)/sigma). Throws NonPositiveScale.
double ald_logdensity(double y, double mu, double sigma, double tau);

struct WeightedObservation {
  double response = 0.0;
  Eigen::VectorXd design;
  double weight = 1.0;
};

// Weighted tau-quantile of residuals: the smallest residual whose cumulative
// weight fraction reaches tau (left-continuous, type-1). Exactly minimizes
// sum_j w_j rho_tau(r_j - a) over a. Throws AllWeightsZero.
double weighted_quantile_scalar(const std::vector<double>& residuals,
                                const std::vector<double>& weights, double tau);

enum class QrSolver {
  kIrls,            // annealed IRLS + exact coordinate polish, no LP
  kIrlsLpFallback,  // same, with one LP call when the polish has not settled
  kLpOnly,          // simplex oracle
};

struct QrOptions {
  double tol = 1e-8;
  QrSolver solver = QrSolver::kIrlsLpFallback;
  int max_irls_iter = 60;  // per annealing stage
};

// Weighted linear quantile regression: minimizes
//   sum_j w_j rho_tau(y_j - x_j' coef)
// over coef. X is n x p (rows = observations). Rows with weight < 1e-12 are
// dropped before solving. Throws RankDeficientDesign / NoConvergence.
Eigen::VectorXd weighted_qr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w, double tau,
                            const QrOptions& opts = {});

Eigen::VectorXd weighted_qr(const std::vector<WeightedObservation>& obs,
                            double tau, const QrOptions& opts = {});

// Exact minimizer via the primal simplex on the standard quantile-regression
// LP (residuals split into positive/negative slacks). Validation oracle and
// fallback path.
Eigen::VectorXd weighted_qr_lp_oracle(const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& w, double tau);

Eigen::VectorXd weighted_qr_lp_oracle(const std::vector<WeightedObservation>& obs,
                                      double tau);

// Objective sum_j w_j rho_tau(y_j - x_j' coef) at a given coefficient vector.
double qr_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& w, double tau,
                    const Eigen::VectorXd& coef);

// Exact line-search polish of the unsmoothed objective from a warm start:
// axis, coordinate-pair, and interpolation-vertex directions, each minimized
// exactly over its breakpoints. Never worse than the input. Tolerates
// rank-deficient designs (moves only along identified directions). `settled`
// reports whether the last cycle's relative improvement was <= 1e-10.
Eigen::VectorXd qr_exact_polish(const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& y,
                                const Eigen::VectorXd& w, double tau,
                                Eigen::VectorXd coef, int max_cycles,
                                bool* settled = nullptr);

}  // namespace qhmm
