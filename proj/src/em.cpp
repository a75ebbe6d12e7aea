#include "qhmm/em.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qhmm/errors.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/kernels.hpp"
#include "qhmm/mstep.hpp"
#include "qhmm/parallel.hpp"

namespace qhmm {

namespace {

double logit(double x) { return std::log(x / (1.0 - x)); }

// sorting permutation by first coordinate of a vector family
std::vector<int> order_by_first_coord(const std::vector<Eigen::VectorXd>& v) {
  std::vector<int> perm(v.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
    return v[a][0] < v[b][0];
  });
  return perm;
}

bool is_identity(const std::vector<int>& perm) {
  for (int k = 0; k < static_cast<int>(perm.size()); ++k) {
    if (perm[k] != k) return false;
  }
  return true;
}

}  // namespace

Eigen::VectorXd gauss_hermite_nodes(int n) {
  if (n == 1) return Eigen::VectorXd::Zero(1);
  // Jacobi matrix for the probabilists' Hermite recurrence: off-diagonal
  // sqrt(k), k = 1..n-1; eigenvalues are the nodes.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double off = std::sqrt(static_cast<double>(k));
    J(k, k - 1) = off;
    J(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(J);
  Eigen::VectorXd nodes = solver.eigenvalues();
  std::sort(nodes.data(), nodes.data() + n);
  return nodes;
}

ParamSet deterministic_start(const PanelDataset& data, const ModelSpec& spec,
                             double s_diag) {
  spec.validate();
  const int m = spec.m, G = spec.G;
  const int p = data.p(), r = data.r(), d = data.d();
  const double tau = spec.tau;

  ParamSet params;
  params.delta = Eigen::VectorXd::Constant(m, 1.0 / m);
  params.Q.resize(m, m);
  for (int k = 0; k < m; ++k) {
    for (int h = 0; h < m; ++h) {
      params.Q(k, h) = (1.0 + (h == k ? s_diag : 0.0)) / (m + s_diag);
    }
  }

  // pooled quantile regression via the block cycle with no latent structure:
  // beta on x, then the w and z coefficients on the partial residuals
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(data.n_obs());
  Eigen::VectorXd yfull = Eigen::VectorXd::Map(data.y().data(), data.n_obs());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd cw = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd cz = Eigen::VectorXd::Zero(r);
  Eigen::VectorXd resid = yfull;
  double obj = kernels::check_loss_sum(resid.data(), nullptr, resid.size(), tau);
  for (int cycle = 0; cycle < 25; ++cycle) {
    if (p > 0) {
      Eigen::VectorXd yb = yfull - data.Z() * cz - data.W() * cw;
      beta = weighted_qr(data.X(), yb, ones, tau);
    }
    if (d > 0) {
      Eigen::VectorXd yw = yfull - data.X() * beta - data.Z() * cz;
      cw = weighted_qr(data.W(), yw, ones, tau);
    }
    if (r > 0) {
      Eigen::VectorXd yz = yfull - data.X() * beta - data.W() * cw;
      cz = weighted_qr(data.Z(), yz, ones, tau);
    }
    resid = yfull - data.X() * beta - data.W() * cw - data.Z() * cz;
    double next = kernels::check_loss_sum(resid.data(), nullptr, resid.size(), tau);
    bool done = obj - next < 1e-10 * (std::abs(obj) + 1.0);
    obj = next;
    if (done) break;
  }
  // joint polish over [x w z]: the cycle alone can stall short of the pooled
  // minimizer
  const int dim = p + d + r;
  if (dim > 0) {
    Eigen::MatrixXd J(data.n_obs(), dim);
    if (p > 0) J.leftCols(p) = data.X();
    if (d > 0) J.middleCols(p, d) = data.W();
    if (r > 0) J.rightCols(r) = data.Z();
    Eigen::VectorXd coef(dim);
    coef << beta, cw, cz;
    coef = qr_exact_polish(J, yfull, ones, tau, coef, 30);
    beta = coef.head(p);
    cw = coef.segment(p, d);
    cz = coef.tail(r);
    resid = yfull - J * coef;
    obj = kernels::check_loss_sum(resid.data(), nullptr, resid.size(), tau);
  }
  params.beta = beta;

  // spread for the quadrature offsets: residual standard deviation
  double mean = resid.mean();
  double spread = std::sqrt((resid.array() - mean).square().sum() /
                            std::max<int>(1, resid.size() - 1));
  if (!(spread > 0.0)) spread = 1.0;

  Eigen::VectorXd nodes_m = gauss_hermite_nodes(m);
  params.alpha.assign(m, cw);
  if (d > 0) {
    for (int h = 0; h < m; ++h) params.alpha[h][0] += nodes_m[h] * spread;
  }
  Eigen::VectorXd nodes_g = gauss_hermite_nodes(G);
  params.b.assign(G, cz);
  if (r > 0) {
    for (int g = 0; g < G; ++g) params.b[g][0] += nodes_g[g] * spread;
  }

  params.sigma = std::max(obj / data.n_obs(), 1e-4);

  if (spec.prior_mode == PriorMode::kConstantMixture) {
    params.pi = Eigen::VectorXd::Constant(G, 1.0 / G);
  } else {
    params.lambda0.resize(G - 1);
    for (int g = 0; g < G - 1; ++g) {
      params.lambda0[g] = logit(static_cast<double>(g + 1) / G);
    }
    params.lambda1 = 0.0;
  }
  return params;
}

ParamSet random_start(const ParamSet& det, const PanelDataset& data,
                      const ModelSpec& spec, double perturb_scale, Rng& rng) {
  ParamSet out = det;
  const double ps = perturb_scale;

  // location scale reference for parameters that start at zero
  double ref = std::max(det.sigma, 1e-3);
  auto jitter_vec = [&](Eigen::VectorXd& v) {
    for (int k = 0; k < v.size(); ++k) {
      double u = 2.0 * rng.uniform() - 1.0;
      v[k] += ps * (std::abs(v[k]) + ref) * u;
    }
  };
  jitter_vec(out.beta);
  for (auto& a : out.alpha) jitter_vec(a);
  for (auto& bg : out.b) jitter_vec(bg);

  auto jitter_row = [&](Eigen::VectorXd row) {
    for (int k = 0; k < row.size(); ++k) {
      double u = 2.0 * rng.uniform() - 1.0;
      row[k] = std::max(row[k] * (1.0 + ps * u), 1e-6);
    }
    row /= row.sum();
    return row;
  };
  out.delta = jitter_row(out.delta);
  for (int k = 0; k < spec.m; ++k) {
    out.Q.row(k) = jitter_row(out.Q.row(k).transpose()).transpose();
  }
  if (spec.prior_mode == PriorMode::kConstantMixture) {
    out.pi = jitter_row(out.pi);
  } else if (spec.G >= 2) {
    // shift the first cut, jitter the gaps multiplicatively: monotone by
    // construction
    out.lambda0[0] += ps * (2.0 * rng.uniform() - 1.0);
    for (int g = 1; g < out.lambda0.size(); ++g) {
      double gap = std::max(det.lambda0[g] - det.lambda0[g - 1], 0.0);
      gap *= std::max(1.0 + ps * (2.0 * rng.uniform() - 1.0), 0.0);
      out.lambda0[g] = out.lambda0[g - 1] + gap;
    }
    out.lambda1 += ps * (2.0 * rng.uniform() - 1.0);
  }
  out.sigma *= std::exp(ps * rng.normal());
  return out;
}

namespace {

void apply_state_perm(ParamSet& prm, const std::vector<int>& perm, int m) {
  std::vector<Eigen::VectorXd> alpha(m);
  Eigen::VectorXd delta(m);
  Eigen::MatrixXd Q(m, m);
  for (int h = 0; h < m; ++h) {
    alpha[h] = prm.alpha[perm[h]];
    delta[h] = prm.delta[perm[h]];
    for (int k = 0; k < m; ++k) Q(h, k) = prm.Q(perm[h], perm[k]);
  }
  prm.alpha = std::move(alpha);
  prm.delta = std::move(delta);
  prm.Q = std::move(Q);
}

void apply_component_perm(ParamSet& prm, const std::vector<int>& perm, int G) {
  std::vector<Eigen::VectorXd> b(G);
  Eigen::VectorXd pi(G);
  for (int g = 0; g < G; ++g) {
    b[g] = prm.b[perm[g]];
    pi[g] = prm.pi[perm[g]];
  }
  prm.b = std::move(b);
  prm.pi = std::move(pi);
}

// States sorted by first alpha coordinate; components (constant-mixture
// mode) by first b coordinate. The drop-out mode's classes are pinned by the
// lambda0 ordering and are never permuted.
void sort_labels(FitResult& res) {
  const int m = res.spec.m, G = res.spec.G;
  if (m > 1 && res.params.alpha[0].size() > 0) {
    std::vector<int> sperm = order_by_first_coord(res.params.alpha);
    if (!is_identity(sperm)) {
      apply_state_perm(res.params, sperm, m);
      res.posterior.permute_states(sperm);
    }
  }
  if (res.spec.prior_mode == PriorMode::kConstantMixture && G > 1 &&
      res.params.b[0].size() > 0) {
    std::vector<int> cperm = order_by_first_coord(res.params.b);
    if (!is_identity(cperm)) {
      apply_component_perm(res.params, cperm, G);
      res.posterior.permute_components(cperm);
    }
  }
}

// Fixes the label gauge before iterating: EM from a consistently relabeled
// start then runs the exact same arithmetic, so the fit is invariant to how
// the start was labeled.
ParamSet canonical_start(const ParamSet& start, const ModelSpec& spec) {
  ParamSet canon = start;
  if (spec.m > 1 && !canon.alpha.empty() && canon.alpha[0].size() > 0) {
    std::vector<int> sperm = order_by_first_coord(canon.alpha);
    if (!is_identity(sperm)) apply_state_perm(canon, sperm, spec.m);
  }
  if (spec.prior_mode == PriorMode::kConstantMixture && spec.G > 1 &&
      !canon.b.empty() && canon.b[0].size() > 0) {
    std::vector<int> cperm = order_by_first_coord(canon.b);
    if (!is_identity(cperm)) apply_component_perm(canon, cperm, spec.G);
  }
  return canon;
}

}  // namespace

FitResult fit(const PanelDataset& data, const ModelSpec& spec,
              const ParamSet& start, const FitOptions& opts) {
  spec.validate();
  start.validate(spec, data.p(), data.r(), data.d());

  FitResult res;
  res.spec = spec;
  res.params = canonical_start(start, spec);
  res.n_params = count_params(spec, data.p(), data.r(), data.d());

  double prev_ll = 0.0;
  for (int iter = 0;; ++iter) {
    EStepResult e = estep_with_loglik(data, res.params, spec);
    res.loglik_trace.push_back(e.loglik);
    res.final_loglik = e.loglik;
    res.posterior = std::move(e.posterior);
    if (iter > 0 &&
        std::abs(e.loglik - prev_ll) / (std::abs(prev_ll) + 1.0) < spec.eps_em) {
      res.converged = true;
      break;
    }
    if (iter >= spec.max_iter) break;  // cap on M-steps
    prev_ll = e.loglik;

    MStepReport report = mstep(data, res.posterior, res.params, spec, opts.qr);
    res.params = report.updated;
    res.diagnostics.empty_state_events += report.empty_state_events;
    res.diagnostics.empty_component_events += report.empty_component_events;
    res.diagnostics.lambda_clamped |= report.lambda_clamped;
    res.n_iter = iter + 1;
    if (report.sigma_floored) {
      res.diagnostics.sigma_floored = true;
      fail(ErrorCode::DegenerateFit,
           "AL scale hit its floor (perfect in-sample fit)");
    }
  }
  res.bic = bic_value(res.final_loglik, res.n_params, data.total_T());
  res.bic_n = bic_value(res.final_loglik, res.n_params, data.n_units());
  if (opts.sort_labels) sort_labels(res);
  return res;
}

FitResult multi_start_fit(const PanelDataset& data, const ModelSpec& spec,
                          const StartConfig& cfg, int jobs,
                          const FitOptions& opts) {
  if (cfg.n_random_starts < 1) {
    fail(ErrorCode::DimensionMismatch, "n_random_starts must be >= 1");
  }
  const int n_starts = cfg.n_random_starts;
  ParamSet det = deterministic_start(data, spec, cfg.s_diag);

  std::vector<std::optional<FitResult>> results(n_starts);
  std::vector<std::string> errors(n_starts);
  parallel_for(n_starts, jobs, [&](int s) {
    try {
      ParamSet start = det;
      if (s > 0) {
        Rng rng(derive_seed(cfg.rng_seed, spec.m, spec.G, s));
        start = random_start(det, data, spec, cfg.perturb_scale, rng);
      }
      results[s] = fit(data, spec, start, opts);
    } catch (const Error& e) {
      errors[s] = e.what();
    }
  });

  int best = -1;
  std::vector<double> start_logliks(n_starts,
                                    std::numeric_limits<double>::quiet_NaN());
  for (int s = 0; s < n_starts; ++s) {
    if (!results[s].has_value()) continue;
    start_logliks[s] = results[s]->final_loglik;
    if (best < 0 || results[s]->final_loglik > results[best]->final_loglik) {
      best = s;
    }
  }
  if (best < 0) {
    fail(ErrorCode::AllStartsFailed,
         "all " + std::to_string(n_starts) + " starts failed (first error: " +
             (errors.empty() ? "" : errors[0]) + ")");
  }
  FitResult out = std::move(*results[best]);
  out.diagnostics.start_logliks = std::move(start_logliks);
  return out;
}

int count_params(const ModelSpec& spec, int p, int r, int d) {
  int k = p + spec.m * d + spec.G * r + (spec.m - 1) +
          spec.m * (spec.m - 1) + 1;
  if (spec.G >= 2) {
    k += (spec.G - 1) +
         (spec.prior_mode == PriorMode::kDropout ? 1 : 0);
  }
  return k;
}

double bic_value(double loglik, int n_params, double basis) {
  return -2.0 * loglik + n_params * std::log(basis);
}

SelectionResult select_model(const PanelDataset& data,
                             const std::vector<int>& m_values,
                             const std::vector<int>& G_values, double tau,
                             PriorMode mode, const StartConfig& cfg, int jobs,
                             const FitOptions& opts, double eps_em,
                             int max_iter) {
  SelectionResult sel;
  for (int m : m_values) {
    for (int G : G_values) {
      GridCell cell;
      cell.m = m;
      cell.G = G;
      sel.grid.push_back(cell);
    }
  }
  // grid cells are independent jobs; starts within a cell run serially here
  // so the (cells x starts) pool is flat and deterministic
  parallel_for(static_cast<int>(sel.grid.size()), jobs, [&](int idx) {
    GridCell& cell = sel.grid[idx];
    ModelSpec spec;
    spec.tau = tau;
    spec.m = cell.m;
    spec.G = cell.G;
    spec.prior_mode = mode;
    spec.eps_em = eps_em;
    spec.max_iter = max_iter;
    try {
      cell.result = multi_start_fit(data, spec, cfg, 1, opts);
      cell.available = true;
    } catch (const Error& e) {
      cell.error = e.what();
    }
  });
  for (int idx = 0; idx < static_cast<int>(sel.grid.size()); ++idx) {
    const GridCell& cell = sel.grid[idx];
    if (!cell.available) continue;
    if (sel.best_index < 0 ||
        cell.result->bic < sel.grid[sel.best_index].result->bic) {
      sel.best_index = idx;
    }
  }
  if (sel.best_index >= 0) sel.grid[sel.best_index].chosen = true;
  return sel;
}

}  // namespace qhmm
