#include "qhmm/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qhmm/errors.hpp"
#include "qhmm/kernels.hpp"

namespace qhmm {

namespace {

constexpr double kWeightFloor = 1e-12;

struct Problem {  // weight-filtered working copy
  Eigen::MatrixXd X;
  Eigen::VectorXd y, w;
};

Problem filter_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& w) {
  if (X.rows() != y.size() || X.rows() != w.size()) {
    fail(ErrorCode::DimensionMismatch, "weighted_qr: row counts differ");
  }
  int kept = 0;
  for (int j = 0; j < w.size(); ++j) {
    if (w[j] >= kWeightFloor) ++kept;
  }
  Problem prob;
  prob.X.resize(kept, X.cols());
  prob.y.resize(kept);
  prob.w.resize(kept);
  int row = 0;
  for (int j = 0; j < w.size(); ++j) {
    if (w[j] >= kWeightFloor) {
      prob.X.row(row) = X.row(j);
      prob.y[row] = y[j];
      prob.w[row] = w[j];
      ++row;
    }
  }
  return prob;
}

void require_full_rank(const Problem& prob) {
  const int p = static_cast<int>(prob.X.cols());
  if (prob.X.rows() < p) {
    fail(ErrorCode::RankDeficientDesign,
         "fewer effective observations than coefficients");
  }
  Eigen::MatrixXd scaled = prob.w.array().sqrt().matrix().asDiagonal() * prob.X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    fail(ErrorCode::RankDeficientDesign,
         "weight-restricted design is rank deficient");
  }
}

// Exact minimizer of f(a) = sum_j w_j rho_tau(r_j - c_j a) for a single
// column c. Piecewise linear and convex with breakpoints r_j / c_j; the slope
// jumps by w_j |c_j| at each breakpoint. Returns the leftmost minimizer.
double solve_single_column(const Eigen::VectorXd& c, const Eigen::VectorXd& r,
                           const Eigen::VectorXd& w, double tau) {
  const int n = static_cast<int>(r.size());
  std::vector<std::pair<double, double>> pts;  // (breakpoint, slope jump)
  pts.reserve(n);
  double slope = 0.0;  // slope left of all breakpoints
  for (int j = 0; j < n; ++j) {
    if (c[j] == 0.0) continue;
    pts.emplace_back(r[j] / c[j], w[j] * std::abs(c[j]));
    slope -= tau * w[j] * c[j];
    if (c[j] < 0.0) slope += w[j] * c[j];
  }
  if (pts.empty()) {
    fail(ErrorCode::RankDeficientDesign, "all-zero design column");
  }
  std::sort(pts.begin(), pts.end());
  for (const auto& [bp, jump] : pts) {
    slope += jump;
    if (slope >= 0.0) return bp;
  }
  return pts.back().first;  // slope should reach +tau*sum(w|c|) > 0
}

// ---------------------------------------------------------------------------
// annealed IRLS on the Huber-smoothed check loss
// ---------------------------------------------------------------------------

double smoothed_objective(const Problem& prob, const Eigen::VectorXd& coef,
                          double tau, double eps) {
  Eigen::VectorXd r = prob.y - prob.X * coef;
  double acc = 0.0;
  for (int j = 0; j < r.size(); ++j) {
    double a = std::abs(r[j]);
    double h = a <= eps ? r[j] * r[j] / (2.0 * eps) + eps / 2.0 : a;
    acc += prob.w[j] * (0.5 * h + (tau - 0.5) * r[j]);
  }
  return acc;
}

Eigen::VectorXd irls_path(const Problem& prob, double tau,
                          const QrOptions& opts, bool& settled) {
  const int p = static_cast<int>(prob.X.cols());
  const int n = static_cast<int>(prob.X.rows());

  // start from the weighted L2 fit
  Eigen::MatrixXd A0 = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b0 = Eigen::VectorXd::Zero(p);
  for (int j = 0; j < n; ++j) {
    A0.selfadjointView<Eigen::Lower>().rankUpdate(prob.X.row(j).transpose(),
                                                  prob.w[j]);
    b0 += prob.w[j] * prob.y[j] * prob.X.row(j).transpose();
  }
  Eigen::VectorXd coef =
      A0.selfadjointView<Eigen::Lower>().ldlt().solve(b0);

  const double eps_stages[] = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  for (double eps : eps_stages) {
    double prev_obj = smoothed_objective(prob, coef, tau, eps);
    for (int iter = 0; iter < opts.max_irls_iter; ++iter) {
      Eigen::VectorXd resid = prob.y - prob.X * coef;
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
      for (int j = 0; j < n; ++j) {
        double mj = std::max(std::abs(resid[j]), eps);
        double aj = prob.w[j] / (2.0 * mj);
        A.selfadjointView<Eigen::Lower>().rankUpdate(
            prob.X.row(j).transpose(), aj);
        rhs += (aj * prob.y[j] + prob.w[j] * (tau - 0.5)) *
               prob.X.row(j).transpose();
      }
      Eigen::VectorXd next =
          A.selfadjointView<Eigen::Lower>().ldlt().solve(rhs);
      if (!next.allFinite()) break;
      // step halving if the smoothed objective went up
      double obj = smoothed_objective(prob, next, tau, eps);
      Eigen::VectorXd cand = next;
      for (int half = 0; half < 12 && obj > prev_obj; ++half) {
        cand = 0.5 * (cand + coef);
        obj = smoothed_objective(prob, cand, tau, eps);
      }
      if (obj > prev_obj) break;  // stage has stalled
      double shift = (cand - coef).cwiseAbs().maxCoeff();
      coef = cand;
      double scale = 1.0 + coef.cwiseAbs().maxCoeff();
      bool small_step = shift < 1e-3 * eps * scale;
      prev_obj = obj;
      if (small_step) break;
    }
  }

  coef = qr_exact_polish(prob.X, prob.y, prob.w, tau, coef, 30, &settled);
  return coef;
}

// ---------------------------------------------------------------------------
// primal simplex oracle
//
// min sum_j w_j [tau u_j + (1-tau) v_j]
// s.t. X bplus - X bminus + u - v = y,  all variables >= 0.
// Initial basis {u_j : y_j >= 0} + {v_j : y_j < 0} is +/- identity.
// ---------------------------------------------------------------------------

Eigen::VectorXd simplex_qr(const Problem& prob, double tau) {
  const int n = static_cast<int>(prob.X.rows());
  const int p = static_cast<int>(prob.X.cols());
  const int n_var = 2 * p + 2 * n;
  // columns: [0,p) beta+, [p,2p) beta-, [2p,2p+n) u, [2p+n,2p+2n) v
  auto column = [&](int idx, Eigen::VectorXd& out) {
    out.setZero();
    if (idx < p) {
      out = prob.X.col(idx);
    } else if (idx < 2 * p) {
      out = -prob.X.col(idx - p);
    } else if (idx < 2 * p + n) {
      out[idx - 2 * p] = 1.0;
    } else {
      out[idx - 2 * p - n] = -1.0;
    }
  };
  auto cost = [&](int idx) -> double {
    if (idx < 2 * p) return 0.0;
    if (idx < 2 * p + n) return prob.w[idx - 2 * p] * tau;
    return prob.w[idx - 2 * p - n] * (1.0 - tau);
  };

  std::vector<int> basis(n);
  Eigen::MatrixXd Binv = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd xb(n);  // basic variable values
  for (int j = 0; j < n; ++j) {
    if (prob.y[j] >= 0.0) {
      basis[j] = 2 * p + j;
      Binv(j, j) = 1.0;
      xb[j] = prob.y[j];
    } else {
      basis[j] = 2 * p + n + j;
      Binv(j, j) = -1.0;
      xb[j] = -prob.y[j];
    }
  }

  std::vector<bool> in_basis(n_var, false);
  for (int j : basis) in_basis[j] = true;

  const int max_pivots = 400 * (n + p) + 5000;
  int degenerate_streak = 0;
  bool bland = false;
  Eigen::VectorXd col(n), direction(n), y_dual(n);

  auto refactorize = [&]() {
    Eigen::MatrixXd B(n, n);
    Eigen::VectorXd bc(n);
    for (int i = 0; i < n; ++i) {
      column(basis[i], bc);
      B.col(i) = bc;
    }
    Binv = B.partialPivLu().inverse();
    xb = Binv * prob.y;
    for (int i = 0; i < n; ++i) {
      if (xb[i] < 0.0) xb[i] = 0.0;
    }
  };

  for (int pivot = 0; pivot < max_pivots; ++pivot) {
    if (pivot > 0 && pivot % 200 == 0) refactorize();
    // duals: y' = c_B' Binv
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += cost(basis[i]) * Binv(i, j);
      y_dual[j] = acc;
    }
    // pricing
    int entering = -1;
    double best = -1e-9;
    for (int idx = 0; idx < n_var; ++idx) {
      if (in_basis[idx]) continue;
      double rc;
      if (idx < p) {
        rc = -y_dual.dot(prob.X.col(idx));
      } else if (idx < 2 * p) {
        rc = y_dual.dot(prob.X.col(idx - p));
      } else if (idx < 2 * p + n) {
        rc = cost(idx) - y_dual[idx - 2 * p];
      } else {
        rc = cost(idx) + y_dual[idx - 2 * p - n];
      }
      if (bland) {
        if (rc < -1e-9) {
          entering = idx;
          break;
        }
      } else if (rc < best) {
        best = rc;
        entering = idx;
      }
    }
    if (entering < 0) break;  // optimal

    column(entering, col);
    direction = Binv * col;

    // ratio test (Bland tie-break on basis index)
    int leaving = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < n; ++i) {
      if (direction[i] > 1e-11) {
        double ratio = xb[i] / direction[i];
        if (leaving < 0 || ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 && basis[i] < basis[leaving])) {
          leaving = i;
          best_ratio = ratio;
        }
      }
    }
    if (leaving < 0) {
      fail(ErrorCode::Internal, "quantile LP reports an unbounded ray");
    }
    if (best_ratio < 1e-12) {
      if (++degenerate_streak > 60) bland = true;
    } else {
      degenerate_streak = 0;
    }

    // pivot: update basis, Binv, xb
    in_basis[basis[leaving]] = false;
    in_basis[entering] = true;
    basis[leaving] = entering;
    double piv = direction[leaving];
    Binv.row(leaving) /= piv;
    xb[leaving] = best_ratio;
    for (int i = 0; i < n; ++i) {
      if (i == leaving) continue;
      double factor = direction[i];
      if (factor != 0.0) {
        Binv.row(i) -= factor * Binv.row(leaving);
        xb[i] -= factor * best_ratio;
        if (xb[i] < 0.0) xb[i] = 0.0;  // guard tiny negative drift
      }
    }
  }

  Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < n; ++i) {
    if (basis[i] < p) {
      coef[basis[i]] += xb[i];
    } else if (basis[i] < 2 * p) {
      coef[basis[i] - p] -= xb[i];
    }
  }
  return coef;
}

}  // namespace

Eigen::VectorXd qr_exact_polish(const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& y,
                                const Eigen::VectorXd& w, double tau,
                                Eigen::VectorXd coef, int max_cycles,
                                bool* settled_out) {
  // line searches along axes, coordinate pairs, and the interpolation-vertex
  // direction (the minimizer interpolates p observations in general position,
  // so a search along the direction to the near-active vertex lands on it)
  const int p = static_cast<int>(X.cols());
  const int n = static_cast<int>(X.rows());
  double obj = qr_objective(X, y, w, tau, coef);
  Eigen::VectorXd resid = y - X * coef;

  auto line_search = [&](const Eigen::VectorXd& dir) {
    Eigen::VectorXd c = X * dir;
    if (c.cwiseAbs().maxCoeff() < 1e-14) return;
    double step = solve_single_column(c, resid, w, tau);
    if (step != 0.0) {
      Eigen::VectorXd cand = resid - step * c;
      double cand_obj =
          kernels::check_loss_sum(cand.data(), w.data(), cand.size(), tau);
      if (cand_obj < obj) {  // strict: zero-weight directions must not drift
        coef += step * dir;
        resid.swap(cand);
        obj = cand_obj;
      }
    }
  };

  bool settled = false;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    double cycle_start = obj;
    for (int k = 0; k < p; ++k) {
      line_search(Eigen::VectorXd::Unit(p, k));
    }
    for (int k = 0; k < p; ++k) {
      for (int l = k + 1; l < p; ++l) {
        Eigen::VectorXd dir = Eigen::VectorXd::Unit(p, k);
        dir[l] = 1.0;
        line_search(dir);
        dir[l] = -1.0;
        line_search(dir);
      }
    }
    // vertex jump over the p rows with smallest |residual|, then edge moves:
    // the minimizer sits at a vertex, and at a vertex the only improving
    // directions are along its edges (null spaces of p-1 active rows)
    if (n >= p && p >= 2) {
      std::partial_sort(order.begin(), order.begin() + p, order.end(),
                        [&](int a, int bdx) {
                          return std::abs(resid[a]) < std::abs(resid[bdx]);
                        });
      Eigen::MatrixXd XA(p, p);
      Eigen::VectorXd yA(p);
      for (int j = 0; j < p; ++j) {
        XA.row(j) = X.row(order[j]);
        yA[j] = y[order[j]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(XA);
      if (lu.isInvertible()) {
        Eigen::VectorXd dir = lu.solve(yA) - coef;
        if (dir.cwiseAbs().maxCoeff() > 0.0) line_search(dir);
      }
      std::partial_sort(order.begin(), order.begin() + p, order.end(),
                        [&](int a, int bdx) {
                          return std::abs(resid[a]) < std::abs(resid[bdx]);
                        });
      Eigen::MatrixXd edges(p - 1, p);
      for (int drop = 0; drop < p; ++drop) {
        int row = 0;
        for (int j = 0; j < p; ++j) {
          if (j == drop) continue;
          edges.row(row++) = X.row(order[j]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> elu(edges);
        Eigen::MatrixXd kernel = elu.kernel();
        for (int c = 0; c < kernel.cols(); ++c) {
          line_search(kernel.col(c));
        }
      }
    }
    double rel = (cycle_start - obj) / (std::abs(cycle_start) + 1e-300);
    if (rel <= 1e-10) {
      settled = true;
      break;
    }
  }
  if (settled_out) *settled_out = settled;
  return coef;
}

double ald_logdensity(double y, double mu, double sigma, double tau) {
  if (!(sigma > 0.0)) {
    fail(ErrorCode::NonPositiveScale, "ald_logdensity: sigma must be > 0");
  }
  return std::log(tau * (1.0 - tau) / sigma) - check_loss((y - mu) / sigma, tau);
}

double weighted_quantile_scalar(const std::vector<double>& residuals,
                                const std::vector<double>& weights,
                                double tau) {
  if (residuals.size() != weights.size()) {
    fail(ErrorCode::DimensionMismatch,
         "weighted_quantile_scalar: length mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w > 0.0) total += w;
  }
  if (!(total > 0.0)) {
    fail(ErrorCode::AllWeightsZero,
         "weighted_quantile_scalar: no strictly positive weight");
  }
  std::vector<int> order(residuals.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int bdx) {
    return residuals[a] < residuals[bdx];
  });
  double cum = 0.0;
  for (int idx : order) {
    cum += std::max(weights[idx], 0.0);
    if (cum >= tau * total) return residuals[idx];
  }
  return residuals[order.back()];
}

double qr_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& w, double tau,
                    const Eigen::VectorXd& coef) {
  Eigen::VectorXd r = y - X * coef;
  return kernels::check_loss_sum(r.data(), w.data(), r.size(), tau);
}

Eigen::VectorXd weighted_qr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w, double tau,
                            const QrOptions& opts) {
  Problem prob = filter_rows(X, y, w);
  if (prob.X.rows() == 0) {
    fail(ErrorCode::AllWeightsZero, "weighted_qr: all weights below floor");
  }
  require_full_rank(prob);
  const int p = static_cast<int>(prob.X.cols());

  if (opts.solver == QrSolver::kLpOnly) {
    return simplex_qr(prob, tau);
  }
  if (p == 1) {
    Eigen::VectorXd coef(1);
    coef[0] = solve_single_column(prob.X.col(0), prob.y, prob.w, tau);
    return coef;
  }
  bool settled = false;
  Eigen::VectorXd coef = irls_path(prob, tau, opts, settled);
  if (opts.solver == QrSolver::kIrlsLpFallback && !settled) {
    Eigen::VectorXd lp = simplex_qr(prob, tau);
    double obj_irls = qr_objective(prob.X, prob.y, prob.w, tau, coef);
    double obj_lp = qr_objective(prob.X, prob.y, prob.w, tau, lp);
    if (obj_lp < obj_irls) coef = lp;
  }
  return coef;
}

namespace {

Problem pack(const std::vector<WeightedObservation>& obs) {
  if (obs.empty()) {
    fail(ErrorCode::DimensionMismatch, "weighted_qr: empty observation list");
  }
  const int p = static_cast<int>(obs.front().design.size());
  Problem prob;
  prob.X.resize(static_cast<int>(obs.size()), p);
  prob.y.resize(static_cast<int>(obs.size()));
  prob.w.resize(static_cast<int>(obs.size()));
  for (int j = 0; j < static_cast<int>(obs.size()); ++j) {
    if (obs[j].design.size() != p) {
      fail(ErrorCode::DimensionMismatch, "weighted_qr: ragged design");
    }
    prob.X.row(j) = obs[j].design;
    prob.y[j] = obs[j].response;
    prob.w[j] = obs[j].weight;
  }
  return prob;
}

}  // namespace

Eigen::VectorXd weighted_qr(const std::vector<WeightedObservation>& obs,
                            double tau, const QrOptions& opts) {
  Problem prob = pack(obs);
  return weighted_qr(prob.X, prob.y, prob.w, tau, opts);
}

Eigen::VectorXd weighted_qr_lp_oracle(const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& w, double tau) {
  Problem prob = filter_rows(X, y, w);
  if (prob.X.rows() == 0) {
    fail(ErrorCode::AllWeightsZero, "lp oracle: all weights below floor");
  }
  require_full_rank(prob);
  return simplex_qr(prob, tau);
}

Eigen::VectorXd weighted_qr_lp_oracle(
    const std::vector<WeightedObservation>& obs, double tau) {
  Problem prob = pack(obs);
  return weighted_qr_lp_oracle(prob.X, prob.y, prob.w, tau);
}

}  // namespace qhmm
