#include "qhmm/mstep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qhmm/errors.hpp"
#include "qhmm/kernels.hpp"

namespace qhmm {

namespace {

constexpr double kOccupancyFloor = 1e-10;
constexpr double kSigmaFloor = 1e-8;
constexpr double kLambdaBox = 50.0;

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Canonical label orders. The block solver's line searches and accept
// guards are iterative; running them in a label-dependent order would make
// relabeled starts follow different arithmetic and converge to different
// points. Sorting by the location parameters makes the M-step arithmetic
// identical for consistently relabeled inputs.
std::vector<int> canonical_order(const std::vector<Eigen::VectorXd>& locs,
                                 const Eigen::VectorXd& probs) {
  std::vector<int> perm(locs.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) {
    for (int j = 0; j < locs[a].size(); ++j) {
      if (locs[a][j] != locs[b][j]) return locs[a][j] < locs[b][j];
    }
    if (probs.size() > a && probs.size() > b && probs[a] != probs[b]) {
      return probs[a] < probs[b];
    }
    return a < b;
  });
  return perm;
}

// ---------------------------------------------------------------------------
// scratch arrays for the longitudinal block, in canonical label order:
// per (g,h) the weight vector zeta_ig * u_it(h|g) over observation rows,
// plus linear-predictor pieces
// ---------------------------------------------------------------------------
struct BlockScratch {
  int n_obs = 0, m = 0, G = 0;
  std::vector<int> sperm, cperm;            // canonical -> true label
  std::vector<std::vector<double>> weight;  // [g*m + h][obs], canonical g,h
  Eigen::VectorXd xb;                       // X beta
  std::vector<Eigen::VectorXd> zb;          // [g] Z b_g, canonical
  std::vector<Eigen::VectorXd> wa;          // [h] W alpha_h, canonical
};

BlockScratch make_scratch(const PanelDataset& data, const PosteriorSet& post,
                          const ParamSet& params, const ModelSpec& spec) {
  BlockScratch s;
  s.n_obs = data.n_obs();
  s.m = post.m();
  s.G = post.G();
  s.sperm = canonical_order(params.alpha, params.delta);
  if (spec.prior_mode == PriorMode::kConstantMixture) {
    s.cperm = canonical_order(params.b, params.pi);
  } else {
    // drop-out classes are pinned by the lambda0 ordering
    s.cperm.resize(s.G);
    std::iota(s.cperm.begin(), s.cperm.end(), 0);
  }
  s.weight.assign(s.G * s.m, std::vector<double>(s.n_obs));
  for (int i = 0; i < data.n_units(); ++i) {
    for (int t = 1; t <= data.T(i); ++t) {
      int obs = data.obs_index(i, t);
      for (int g = 0; g < s.G; ++g) {
        double zg = post.zeta(i, s.cperm[g]);
        for (int h = 0; h < s.m; ++h) {
          s.weight[g * s.m + h][obs] =
              zg * post.ucond(i, t, s.sperm[h], s.cperm[g]);
        }
      }
    }
  }
  s.xb = data.X() * params.beta;
  s.zb.resize(s.G);
  for (int g = 0; g < s.G; ++g) s.zb[g] = data.Z() * params.b[s.cperm[g]];
  s.wa.resize(s.m);
  for (int h = 0; h < s.m; ++h) s.wa[h] = data.W() * params.alpha[s.sperm[h]];
  return s;
}

double total_objective(const PanelDataset& data, const BlockScratch& s,
                       double tau) {
  double acc = 0.0;
  Eigen::VectorXd resid(s.n_obs);
  for (int g = 0; g < s.G; ++g) {
    for (int h = 0; h < s.m; ++h) {
      for (int obs = 0; obs < s.n_obs; ++obs) {
        resid[obs] = data.y(obs) - s.xb[obs] - s.zb[g][obs] - s.wa[h][obs];
      }
      acc += kernels::check_loss_sum(resid.data(),
                                     s.weight[g * s.m + h].data(), s.n_obs, tau);
    }
  }
  return acc;
}

bool is_intercept_column(const Eigen::MatrixXd& M) {
  if (M.cols() != 1) return false;
  for (int j = 0; j < M.rows(); ++j) {
    if (M(j, 0) != 1.0) return false;
  }
  return true;
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::MatrixXd> update_initial_transition(
    const PosteriorSet& post, const PanelDataset& data, int m,
    int* empty_state_events) {
  const int n = data.n_units();
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < n; ++i) {
    for (int h = 0; h < m; ++h) delta[h] += post.u1(i, 1, h);
  }
  delta /= delta.sum();

  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < n; ++i) {
    for (int t = 2; t <= data.T(i); ++t) {
      for (int k = 0; k < m; ++k) {
        for (int h = 0; h < m; ++h) {
          Q(k, h) += post.u2(i, t, k, h);
        }
      }
    }
  }
  for (int k = 0; k < m; ++k) {
    double row_sum = Q.row(k).sum();
    if (row_sum < kOccupancyFloor) {
      Q.row(k).setConstant(1.0 / m);
      if (empty_state_events) ++*empty_state_events;
    } else {
      Q.row(k) /= row_sum;
    }
  }
  return {delta, Q};
}

LongitudinalBlockResult update_longitudinal_block(const PanelDataset& data,
                                                  const PosteriorSet& post,
                                                  const ParamSet& params,
                                                  const ModelSpec& spec,
                                                  const QrOptions& qr_opts) {
  const int m = spec.m, G = spec.G;
  const int n_obs = data.n_obs();
  const double tau = spec.tau;

  LongitudinalBlockResult out;
  out.beta = params.beta;
  out.alpha = params.alpha;
  out.b = params.b;

  BlockScratch s = make_scratch(data, post, params, spec);
  // canonical-order working copies of the label-indexed blocks
  std::vector<Eigen::VectorXd> alpha_c(m), b_c(G);
  for (int h = 0; h < m; ++h) alpha_c[h] = params.alpha[s.sperm[h]];
  for (int g = 0; g < G; ++g) b_c[g] = params.b[s.cperm[g]];
  out.objective_before = total_objective(data, s, tau);
  double obj = out.objective_before;
  double cycle_start_obj = obj;

  const bool w_is_intercept = is_intercept_column(data.W());
  const long rows_per_block = static_cast<long>(n_obs) * m * G;

  Eigen::MatrixXd Xp(rows_per_block, data.p());
  Eigen::VectorXd yp(rows_per_block), wp(rows_per_block);

  for (int cycle = 0; cycle < 25; ++cycle) {
    // ---- beta: pool all (obs,h,g) rows
    if (data.p() > 0) {
      long row = 0;
      for (int g = 0; g < G; ++g) {
        for (int h = 0; h < m; ++h) {
          const auto& wt = s.weight[g * m + h];
          for (int obs = 0; obs < n_obs; ++obs, ++row) {
            Xp.row(row) = data.X().row(obs);
            yp[row] = data.y(obs) - s.zb[g][obs] - s.wa[h][obs];
            wp[row] = wt[obs];
          }
        }
      }
      Eigen::VectorXd cand = weighted_qr(Xp, yp, wp, tau, qr_opts);
      Eigen::VectorXd saved = s.xb;
      s.xb = data.X() * cand;
      double new_obj = total_objective(data, s, tau);
      if (new_obj <= obj) {
        out.beta = cand;
        obj = new_obj;
      } else {
        s.xb = saved;  // keep the previous block value
      }
    }

    // ---- alpha_h: rows for state h over (obs,g)
    for (int h = 0; data.d() > 0 && h < m; ++h) {
      double mass = 0.0;
      for (int g = 0; g < G; ++g) {
        for (int obs = 0; obs < n_obs; ++obs) mass += s.weight[g * m + h][obs];
      }
      if (mass < kOccupancyFloor) {
        ++out.empty_state_events;
        continue;
      }
      Eigen::VectorXd cand;
      if (w_is_intercept) {
        std::vector<double> resid, wt;
        resid.reserve(n_obs * G);
        wt.reserve(n_obs * G);
        for (int g = 0; g < G; ++g) {
          const auto& wv = s.weight[g * m + h];
          for (int obs = 0; obs < n_obs; ++obs) {
            if (wv[obs] > 0.0) {
              resid.push_back(data.y(obs) - s.xb[obs] - s.zb[g][obs]);
              wt.push_back(wv[obs]);
            }
          }
        }
        cand.resize(1);
        cand[0] = weighted_quantile_scalar(resid, wt, tau);
      } else {
        long rows = static_cast<long>(n_obs) * G;
        Eigen::MatrixXd Wd(rows, data.d());
        Eigen::VectorXd yv(rows), wv(rows);
        long row = 0;
        for (int g = 0; g < G; ++g) {
          const auto& wgt = s.weight[g * m + h];
          for (int obs = 0; obs < n_obs; ++obs, ++row) {
            Wd.row(row) = data.W().row(obs);
            yv[row] = data.y(obs) - s.xb[obs] - s.zb[g][obs];
            wv[row] = wgt[obs];
          }
        }
        cand = weighted_qr(Wd, yv, wv, tau, qr_opts);
      }
      Eigen::VectorXd saved = s.wa[h];
      s.wa[h] = data.W() * cand;
      double new_obj = total_objective(data, s, tau);
      if (new_obj <= obj) {
        alpha_c[h] = cand;
        obj = new_obj;
      } else {
        s.wa[h] = saved;
      }
    }

    // ---- b_g: rows for component g over (obs,h)
    for (int g = 0; data.r() > 0 && g < G; ++g) {
      double mass = 0.0;
      for (int h = 0; h < m; ++h) {
        for (int obs = 0; obs < n_obs; ++obs) mass += s.weight[g * m + h][obs];
      }
      if (mass < kOccupancyFloor) {
        ++out.empty_component_events;
        continue;
      }
      long rows = static_cast<long>(n_obs) * m;
      Eigen::MatrixXd Zd(rows, data.r());
      Eigen::VectorXd yv(rows), wv(rows);
      long row = 0;
      for (int h = 0; h < m; ++h) {
        const auto& wgt = s.weight[g * m + h];
        for (int obs = 0; obs < n_obs; ++obs, ++row) {
          Zd.row(row) = data.Z().row(obs);
          yv[row] = data.y(obs) - s.xb[obs] - s.wa[h][obs];
          wv[row] = wgt[obs];
        }
      }
      Eigen::VectorXd cand = weighted_qr(Zd, yv, wv, tau, qr_opts);
      Eigen::VectorXd saved = s.zb[g];
      s.zb[g] = data.Z() * cand;
      double new_obj = total_objective(data, s, tau);
      if (new_obj <= obj) {
        b_c[g] = cand;
        obj = new_obj;
      } else {
        s.zb[g] = saved;
      }
    }

    if (cycle_start_obj - obj < 1e-8 * (std::abs(cycle_start_obj) + 1.0)) break;
    cycle_start_obj = obj;
  }

  // Joint refinement over the concatenated design [x | e_h w | e_g z]: block
  // cycling can stall short of the joint minimizer of this non-smooth
  // objective, and the contract is the joint minimum. Warm-started exact
  // line searches; rows with negligible weight dropped.
  const int dim = data.p() + m * data.d() + G * data.r();
  if (dim > 0) {
    long rows = 0;
    for (int g = 0; g < G; ++g) {
      for (int h = 0; h < m; ++h) {
        const auto& wt = s.weight[g * m + h];
        for (int obs = 0; obs < n_obs; ++obs) {
          if (wt[obs] >= 1e-12) ++rows;
        }
      }
    }
    if (rows > 0) {
      Eigen::MatrixXd Xj = Eigen::MatrixXd::Zero(rows, dim);
      Eigen::VectorXd yj(rows), wj(rows);
      long row = 0;
      for (int g = 0; g < G; ++g) {
        for (int h = 0; h < m; ++h) {
          const auto& wt = s.weight[g * m + h];
          for (int obs = 0; obs < n_obs; ++obs) {
            if (wt[obs] < 1e-12) continue;
            Xj.block(row, 0, 1, data.p()) = data.X().row(obs);
            Xj.block(row, data.p() + h * data.d(), 1, data.d()) =
                data.W().row(obs);
            Xj.block(row, data.p() + m * data.d() + g * data.r(), 1, data.r()) =
                data.Z().row(obs);
            yj[row] = data.y(obs);
            wj[row] = wt[obs];
            ++row;
          }
        }
      }
      Eigen::VectorXd coef(dim);
      coef.head(data.p()) = out.beta;
      for (int h = 0; h < m; ++h) {
        coef.segment(data.p() + h * data.d(), data.d()) = alpha_c[h];
      }
      for (int g = 0; g < G; ++g) {
        coef.segment(data.p() + m * data.d() + g * data.r(), data.r()) = b_c[g];
      }
      Eigen::VectorXd polished =
          qr_exact_polish(Xj, yj, wj, tau, coef, /*max_cycles=*/12);
      if ((polished - coef).cwiseAbs().maxCoeff() > 0.0) {
        // accept against the full objective (negligible-weight rows included)
        Eigen::VectorXd saved_xb = s.xb;
        std::vector<Eigen::VectorXd> saved_zb = s.zb, saved_wa = s.wa;
        Eigen::VectorXd cand_beta = polished.head(data.p());
        std::vector<Eigen::VectorXd> cand_alpha(m), cand_b(G);
        for (int h = 0; h < m; ++h) {
          cand_alpha[h] = polished.segment(data.p() + h * data.d(), data.d());
        }
        for (int g = 0; g < G; ++g) {
          cand_b[g] = polished.segment(data.p() + m * data.d() + g * data.r(),
                                       data.r());
        }
        s.xb = data.X() * cand_beta;
        for (int h = 0; h < m; ++h) s.wa[h] = data.W() * cand_alpha[h];
        for (int g = 0; g < G; ++g) s.zb[g] = data.Z() * cand_b[g];
        double new_total = total_objective(data, s, tau);
        if (new_total <= obj) {
          out.beta = std::move(cand_beta);
          alpha_c = std::move(cand_alpha);
          b_c = std::move(cand_b);
          obj = new_total;
        } else {
          s.xb = std::move(saved_xb);
          s.zb = std::move(saved_zb);
          s.wa = std::move(saved_wa);
        }
      }
    }
  }
  // map the canonical-order blocks back to the true labels
  for (int h = 0; h < m; ++h) out.alpha[s.sperm[h]] = alpha_c[h];
  for (int g = 0; g < G; ++g) out.b[s.cperm[g]] = b_c[g];
  out.objective_after = obj;
  return out;
}

PriorUpdate update_mixture_priors(const PosteriorSet& post,
                                  const PanelDataset& data,
                                  const ModelSpec& spec,
                                  const ParamSet& current) {
  const int n = data.n_units();
  const int G = spec.G;
  PriorUpdate out;

  if (spec.prior_mode == PriorMode::kConstantMixture) {
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(G);
    for (int i = 0; i < n; ++i) {
      for (int g = 0; g < G; ++g) pi[g] += post.zeta(i, g);
    }
    out.pi = pi / pi.sum();
    return out;
  }

  if (G == 1) {  // degenerate: no free prior parameters
    out.lambda0.resize(0);
    out.lambda1 = 0.0;
    return out;
  }

  // Aggregate zeta by distinct T value: the objective only depends on
  // Z[v][g] = sum_{i: T_i = v} zeta_ig.
  std::vector<std::pair<int, Eigen::VectorXd>> agg;
  for (int i = 0; i < n; ++i) {
    int v = data.T(i);
    auto it = std::find_if(agg.begin(), agg.end(),
                           [v](const auto& kv) { return kv.first == v; });
    if (it == agg.end()) {
      agg.emplace_back(v, Eigen::VectorXd::Zero(G));
      it = std::prev(agg.end());
    }
    for (int g = 0; g < G; ++g) it->second[g] += post.zeta(i, g);
  }

  // Unconstrained parameterization: theta = (lambda01, eta_2..eta_{G-1},
  // lambda1) with lambda0_g = lambda01 + sum_{l<=g} exp(eta_l).
  const int dim = G;  // 1 + (G-2) + 1
  auto unpack = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& lambda0,
                    double& lambda1) {
    lambda0.resize(G - 1);
    lambda0[0] = theta[0];
    for (int g = 1; g < G - 1; ++g) {
      lambda0[g] = lambda0[g - 1] + std::exp(theta[g]);
    }
    lambda1 = theta[dim - 1];
  };

  // negative weighted cumulative-logit log-likelihood and gradient
  auto eval = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
    Eigen::VectorXd lambda0;
    double lambda1;
    unpack(theta, lambda0, lambda1);
    double nll = 0.0;
    if (grad) grad->setZero(dim);
    for (const auto& [v, zrow] : agg) {
      // cut points c_g = lambda0_g + lambda1 v, F_0 = 0, F_G = 1
      Eigen::VectorXd F(G + 1), f(G + 1);
      F[0] = 0.0;
      f[0] = 0.0;
      F[G] = 1.0;
      f[G] = 0.0;
      for (int g = 1; g < G; ++g) {
        double c = lambda0[g - 1] + lambda1 * v;
        F[g] = logistic(c);
        f[g] = F[g] * (1.0 - F[g]);
      }
      for (int g = 0; g < G; ++g) {
        double pg = std::max(F[g + 1] - F[g], 1e-300);
        nll -= zrow[g] * std::log(pg);
        if (grad) {
          // d nll / d c_k for the two adjacent cutpoints
          double coef = zrow[g] / pg;
          // c_{g+1} (upper cut, index g+1 in 1..G-1)
          if (g + 1 <= G - 1) {
            double d_upper = -coef * f[g + 1];
            // chain to theta: c_k depends on theta_0 (always), eta_l for l<=k,
            // and lambda1 via v
            (*grad)[0] += d_upper;
            for (int l = 1; l <= g; ++l) {
              (*grad)[l] += d_upper * std::exp(theta[l]);
            }
            (*grad)[dim - 1] += d_upper * v;
          }
          // c_g (lower cut, index g in 1..G-1)
          if (g >= 1) {
            double d_lower = coef * f[g];
            (*grad)[0] += d_lower;
            for (int l = 1; l <= g - 1; ++l) {
              (*grad)[l] += d_lower * std::exp(theta[l]);
            }
            (*grad)[dim - 1] += d_lower * v;
          }
        }
      }
    }
    return nll;
  };

  // warm start from the incoming lambda (gaps clamped away from zero)
  Eigen::VectorXd theta(dim);
  theta[0] = current.lambda0.size() > 0 ? current.lambda0[0] : 0.0;
  for (int g = 1; g < G - 1; ++g) {
    double gap = current.lambda0[g] - current.lambda0[g - 1];
    theta[g] = std::log(std::max(gap, 1e-6));
  }
  theta[dim - 1] = current.lambda1;

  // BFGS with backtracking; accepts only improving steps
  Eigen::VectorXd grad(dim), grad_new(dim);
  double fval = eval(theta, &grad);
  const double f_start = fval;
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(dim, dim);
  bool converged = false;
  for (int iter = 0; iter < 200; ++iter) {
    if (grad.norm() < 1e-7 * (1.0 + std::abs(fval))) {
      converged = true;
      break;
    }
    Eigen::VectorXd dir = -Hinv * grad;
    if (dir.dot(grad) >= 0.0) {  // reset on loss of descent
      Hinv.setIdentity();
      dir = -grad;
    }
    double step = 1.0;
    double f_new = fval;
    Eigen::VectorXd theta_new = theta;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      theta_new = theta + step * dir;
      f_new = eval(theta_new, nullptr);
      if (std::isfinite(f_new) && f_new <= fval - 1e-4 * step * (-dir.dot(grad))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    eval(theta_new, &grad_new);
    Eigen::VectorXd sk = theta_new - theta;
    Eigen::VectorXd yk = grad_new - grad;
    double sy = sk.dot(yk);
    if (sy > 1e-12) {
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
      Eigen::MatrixXd V = I - (sk * yk.transpose()) / sy;
      Hinv = V * Hinv * V.transpose() + (sk * sk.transpose()) / sy;
    }
    theta = theta_new;
    fval = f_new;
    grad = grad_new;
    if (sk.norm() < 1e-10 * (1.0 + theta.norm())) {
      converged = true;
      break;
    }
  }
  out.converged = converged;

  Eigen::VectorXd lambda0;
  double lambda1;
  unpack(theta, lambda0, lambda1);
  // separation guard: clamp into a +/-50 box (flagged)
  for (int g = 0; g < G - 1; ++g) {
    if (std::abs(lambda0[g]) > kLambdaBox) {
      lambda0[g] = std::clamp(lambda0[g], -kLambdaBox, kLambdaBox);
      out.clamped = true;
    }
  }
  for (int g = 1; g < G - 1; ++g) {
    lambda0[g] = std::max(lambda0[g], lambda0[g - 1]);
  }
  if (std::abs(lambda1) > kLambdaBox) {
    lambda1 = std::clamp(lambda1, -kLambdaBox, kLambdaBox);
    out.clamped = true;
  }

  // never return something worse than the incoming lambda; the box clamp can
  // undo the ascent, so compare at the value actually returned
  double f_final = fval;
  if (out.clamped) {
    Eigen::VectorXd theta_clamped(dim);
    theta_clamped[0] = lambda0[0];
    for (int g = 1; g < G - 1; ++g) {
      theta_clamped[g] = std::log(std::max(lambda0[g] - lambda0[g - 1], 1e-12));
    }
    theta_clamped[dim - 1] = lambda1;
    f_final = eval(theta_clamped, nullptr);
    unpack(theta_clamped, lambda0, lambda1);  // round-trip the gap floor
  }
  if (f_final > f_start && current.lambda0.size() == G - 1) {
    out.lambda0 = current.lambda0;
    out.lambda1 = current.lambda1;
  } else {
    out.lambda0 = lambda0;
    out.lambda1 = lambda1;
  }
  return out;
}

double update_sigma(const PanelDataset& data, const PosteriorSet& post,
                    const ParamSet& params, const ModelSpec& spec,
                    bool* floored) {
  BlockScratch s = make_scratch(data, post, params, spec);
  double loss = total_objective(data, s, spec.tau);
  double sigma = loss / data.total_T();
  if (floored) *floored = false;
  if (sigma < kSigmaFloor) {
    sigma = kSigmaFloor;
    if (floored) *floored = true;
  }
  return sigma;
}

double longitudinal_objective(const PanelDataset& data,
                              const PosteriorSet& post,
                              const ParamSet& params, const ModelSpec& spec) {
  BlockScratch s = make_scratch(data, post, params, spec);
  return total_objective(data, s, spec.tau);
}

MStepReport mstep(const PanelDataset& data, const PosteriorSet& post,
                  const ParamSet& params, const ModelSpec& spec,
                  const QrOptions& qr_opts) {
  MStepReport report;
  report.updated = params;

  auto [delta, Q] =
      update_initial_transition(post, data, spec.m, &report.empty_state_events);
  report.updated.delta = delta;
  report.updated.Q = Q;

  auto block = update_longitudinal_block(data, post, params, spec, qr_opts);
  report.updated.beta = block.beta;
  report.updated.alpha = block.alpha;
  report.updated.b = block.b;
  report.block_objective_before = block.objective_before;
  report.block_objective_after = block.objective_after;
  report.empty_state_events += block.empty_state_events;
  report.empty_component_events += block.empty_component_events;

  PriorUpdate prior = update_mixture_priors(post, data, spec, params);
  if (spec.prior_mode == PriorMode::kConstantMixture) {
    report.updated.pi = prior.pi;
  } else {
    report.updated.lambda0 = prior.lambda0;
    report.updated.lambda1 = prior.lambda1;
  }
  report.lambda_converged = prior.converged;
  report.lambda_clamped = prior.clamped;

  report.updated.sigma = update_sigma(data, post, report.updated, spec,
                                      &report.sigma_floored);
  return report;
}

}  // namespace qhmm
