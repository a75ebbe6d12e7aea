#include "qhmm/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qhmm/errors.hpp"
#include "qhmm/kernels.hpp"

namespace qhmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double logistic(double x) {
  // stable on both tails
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd log_transition(const ParamSet& params, int m) {
  Eigen::MatrixXd logQ(m, m);
  for (int k = 0; k < m; ++k) {
    for (int h = 0; h < m; ++h) {
      logQ(k, h) = params.Q(k, h) > 0.0 ? std::log(params.Q(k, h)) : kNegInf;
    }
  }
  return logQ;
}

using LogDensities = std::vector<std::vector<std::vector<double>>>;

ForwardBackwardTable forward_impl(const PanelDataset& data,
                                  const ParamSet& params,
                                  const ModelSpec& spec,
                                  const LogDensities& logf) {
  const int n = data.n_units();
  const int m = spec.m, G = spec.G;

  ForwardBackwardTable table;
  table.m = m;
  table.G = G;
  table.log_fwd.assign(G, std::vector<double>(data.n_obs() * m, kNegInf));
  table.per_unit_loglik.assign(n, 0.0);

  std::vector<double> log_delta(m);
  for (int h = 0; h < m; ++h) {
    log_delta[h] = params.delta[h] > 0.0 ? std::log(params.delta[h]) : kNegInf;
  }
  Eigen::MatrixXd logQ = log_transition(params, m);

  std::vector<double> tmp(m), mix(m * G);
  for (int i = 0; i < n; ++i) {
    const int T_i = data.T(i);
    const int base = data.offset(i);
    for (int g = 0; g < G; ++g) {
      auto& fwd = table.log_fwd[g];
      for (int h = 0; h < m; ++h) {
        fwd[base * m + h] = log_delta[h] + logf[g][h][base];
      }
      for (int t = 2; t <= T_i; ++t) {
        const int obs = base + t - 1;
        for (int h = 0; h < m; ++h) {
          for (int k = 0; k < m; ++k) {
            tmp[k] = fwd[(obs - 1) * m + k] + logQ(k, h);
          }
          fwd[obs * m + h] = logsumexp(tmp.data(), m) + logf[g][h][obs];
        }
      }
    }
    // loglik_i = log sum_{h,g} a_{iT_i}(h,g) pi_ig
    Eigen::VectorXd priors = component_priors(params, spec, T_i);
    const int last = base + T_i - 1;
    for (int g = 0; g < G; ++g) {
      double lp = priors[g] > 0.0 ? std::log(priors[g]) : kNegInf;
      for (int h = 0; h < m; ++h) {
        mix[g * m + h] = table.log_fwd[g][last * m + h] + lp;
      }
    }
    double ll = logsumexp(mix.data(), m * G);
    if (!std::isfinite(ll)) {
      fail(ErrorCode::NonFiniteLikelihood,
           "unit " + data.unit_id(i) + " has non-finite likelihood");
    }
    table.per_unit_loglik[i] = ll;
    table.total_loglik += ll;
  }
  return table;
}

void backward_impl(const PanelDataset& data, const ParamSet& params,
                   const ModelSpec& spec, const LogDensities& logf,
                   ForwardBackwardTable& table) {
  const int n = data.n_units();
  const int m = spec.m, G = spec.G;
  table.log_bwd.assign(G, std::vector<double>(data.n_obs() * m, kNegInf));
  Eigen::MatrixXd logQ = log_transition(params, m);

  std::vector<double> tmp(m);
  for (int i = 0; i < n; ++i) {
    const int T_i = data.T(i);
    const int base = data.offset(i);
    for (int g = 0; g < G; ++g) {
      auto& bwd = table.log_bwd[g];
      const int last = base + T_i - 1;
      for (int h = 0; h < m; ++h) bwd[last * m + h] = 0.0;
      for (int t = T_i - 1; t >= 1; --t) {
        const int obs = base + t - 1;
        for (int h = 0; h < m; ++h) {
          for (int k = 0; k < m; ++k) {
            tmp[k] = bwd[(obs + 1) * m + k] + logQ(h, k) + logf[g][k][obs + 1];
          }
          bwd[obs * m + h] = logsumexp(tmp.data(), m);
        }
      }
    }
  }
}

}  // namespace

double logsumexp(const double* v, int n) {
  double mx = kNegInf;
  for (int j = 0; j < n; ++j) mx = std::max(mx, v[j]);
  if (mx == kNegInf) return kNegInf;
  if (!std::isfinite(mx)) return mx;  // +inf or NaN propagates
  double acc = 0.0;
  for (int j = 0; j < n; ++j) acc += std::exp(v[j] - mx);
  return mx + std::log(acc);
}

double component_prior(const ParamSet& params, const ModelSpec& spec, int T_i,
                       int g) {
  if (spec.prior_mode == PriorMode::kConstantMixture) {
    return params.pi[g];
  }
  const int G = spec.G;
  if (G == 1) return 1.0;
  auto cum = [&](int idx) -> double {  // F(lambda0_idx + lambda1 T_i), idx 1..G-1
    if (idx <= 0) return 0.0;
    if (idx >= G) return 1.0;
    return logistic(params.lambda0[idx - 1] + params.lambda1 * T_i);
  };
  return cum(g + 1) - cum(g);
}

Eigen::VectorXd component_priors(const ParamSet& params, const ModelSpec& spec,
                                 int T_i) {
  Eigen::VectorXd out(spec.G);
  for (int g = 0; g < spec.G; ++g) out[g] = component_prior(params, spec, T_i, g);
  return out;
}

std::vector<std::vector<std::vector<double>>> obs_logdensities(
    const PanelDataset& data, const ParamSet& params, const ModelSpec& spec) {
  const int n_obs = data.n_obs();
  const int m = spec.m, G = spec.G;

  // linear-predictor pieces, then one fused kernel pass per (g,h)
  Eigen::VectorXd xb = data.X() * params.beta;
  std::vector<Eigen::VectorXd> zb(G), wa(m);
  for (int g = 0; g < G; ++g) zb[g] = data.Z() * params.b[g];
  for (int h = 0; h < m; ++h) wa[h] = data.W() * params.alpha[h];

  LogDensities logf(
      G, std::vector<std::vector<double>>(m, std::vector<double>(n_obs)));
  for (int g = 0; g < G; ++g) {
    for (int h = 0; h < m; ++h) {
      kernels::ald_loglik_batch(data.y().data(), xb.data(), zb[g].data(),
                                wa[h].data(), logf[g][h].data(), n_obs,
                                params.sigma, spec.tau);
    }
  }
  return logf;
}

ForwardBackwardTable forward(const PanelDataset& data, const ParamSet& params,
                             const ModelSpec& spec) {
  return forward_impl(data, params, spec, obs_logdensities(data, params, spec));
}

void backward(const PanelDataset& data, const ParamSet& params,
              const ModelSpec& spec, ForwardBackwardTable& table) {
  backward_impl(data, params, spec, obs_logdensities(data, params, spec), table);
}

PosteriorSet estep(const PanelDataset& data, const ParamSet& params,
                   const ModelSpec& spec, const ForwardBackwardTable& table,
                   const std::vector<std::vector<std::vector<double>>>& logf) {
  const int n = data.n_units();
  const int m = spec.m, G = spec.G;
  PosteriorSet post(data, m, G);
  Eigen::MatrixXd logQ = log_transition(params, m);

  std::vector<double> buf(std::max(m * G, m));
  std::vector<double> terms(G), col(m);
  for (int i = 0; i < n; ++i) {
    const int T_i = data.T(i);
    const int base = data.offset(i);
    const double ll = table.per_unit_loglik[i];
    Eigen::VectorXd priors = component_priors(params, spec, T_i);
    std::vector<double> log_prior(G);
    for (int g = 0; g < G; ++g) {
      log_prior[g] = priors[g] > 0.0 ? std::log(priors[g]) : kNegInf;
    }

    // zeta_ig = sum_h a_{iT_i}(h,g) pi_ig / L_i
    const int last = base + T_i - 1;
    for (int g = 0; g < G; ++g) {
      for (int h = 0; h < m; ++h) {
        buf[h] = table.log_fwd[g][last * m + h];
      }
      post.zeta(i, g) = std::exp(logsumexp(buf.data(), m) + log_prior[g] - ll);
    }

    for (int t = 1; t <= T_i; ++t) {
      const int obs = base + t - 1;
      for (int h = 0; h < m; ++h) {
        for (int g = 0; g < G; ++g) {
          buf[h * G + g] = table.log_fwd[g][obs * m + h] +
                           table.log_bwd[g][obs * m + h] + log_prior[g];
        }
      }
      for (int h = 0; h < m; ++h) {
        post.u1(i, t, h) = std::exp(logsumexp(buf.data() + h * G, G) - ll);
      }
      // u_cond: within component g the prior cancels
      for (int g = 0; g < G; ++g) {
        for (int h = 0; h < m; ++h) {
          col[h] = table.log_fwd[g][obs * m + h] + table.log_bwd[g][obs * m + h];
        }
        double denom = logsumexp(col.data(), m);
        for (int h = 0; h < m; ++h) {
          post.ucond(i, t, h, g) =
              denom == kNegInf ? 0.0 : std::exp(col[h] - denom);
        }
      }
      if (t >= 2) {
        for (int k = 0; k < m; ++k) {
          for (int h = 0; h < m; ++h) {
            for (int g = 0; g < G; ++g) {
              terms[g] = table.log_fwd[g][(obs - 1) * m + k] + logQ(k, h) +
                         logf[g][h][obs] + table.log_bwd[g][obs * m + h] +
                         log_prior[g];
            }
            post.u2(i, t, k, h) = std::exp(logsumexp(terms.data(), G) - ll);
          }
        }
      }
    }
  }
  return post;
}

PosteriorSet estep(const PanelDataset& data, const ParamSet& params,
                   const ModelSpec& spec) {
  auto logf = obs_logdensities(data, params, spec);
  ForwardBackwardTable table = forward_impl(data, params, spec, logf);
  backward_impl(data, params, spec, logf, table);
  return estep(data, params, spec, table, logf);
}

double observed_loglik(const PanelDataset& data, const ParamSet& params,
                       const ModelSpec& spec) {
  return forward(data, params, spec).total_loglik;
}

EStepResult estep_with_loglik(const PanelDataset& data, const ParamSet& params,
                              const ModelSpec& spec) {
  auto logf = obs_logdensities(data, params, spec);
  ForwardBackwardTable table = forward_impl(data, params, spec, logf);
  backward_impl(data, params, spec, logf, table);
  EStepResult out{estep(data, params, spec, table, logf), table.total_loglik,
                  std::move(table.per_unit_loglik)};
  return out;
}

}  // namespace qhmm
