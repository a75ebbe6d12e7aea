#include "qhmm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qhmm/errors.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/parallel.hpp"
#include "qhmm/quantile.hpp"

namespace qhmm {

std::vector<std::string> param_names(const ModelSpec& spec,
                                     const PanelDataset& data) {
  std::vector<std::string> names;
  for (const auto& nm : data.x_names()) names.push_back("beta." + nm);
  for (int h = 1; h <= spec.m; ++h) {
    for (const auto& nm : data.w_names()) {
      names.push_back("alpha." + std::to_string(h) + "." + nm);
    }
  }
  for (int g = 1; g <= spec.G; ++g) {
    for (const auto& nm : data.z_names()) {
      names.push_back("b." + std::to_string(g) + "." + nm);
    }
  }
  for (int h = 1; h <= spec.m; ++h) names.push_back("delta." + std::to_string(h));
  for (int k = 1; k <= spec.m; ++k) {
    for (int h = 1; h <= spec.m; ++h) {
      names.push_back("Q." + std::to_string(k) + "." + std::to_string(h));
    }
  }
  names.push_back("sigma");
  if (spec.prior_mode == PriorMode::kConstantMixture) {
    for (int g = 1; g <= spec.G; ++g) names.push_back("pi." + std::to_string(g));
  } else if (spec.G >= 2) {
    for (int g = 1; g <= spec.G - 1; ++g) {
      names.push_back("lambda0." + std::to_string(g));
    }
    names.push_back("lambda1");
  }
  return names;
}

Eigen::VectorXd flatten_params(const ParamSet& params, const ModelSpec& spec) {
  std::vector<double> vals;
  for (int j = 0; j < params.beta.size(); ++j) vals.push_back(params.beta[j]);
  for (const auto& a : params.alpha) {
    for (int j = 0; j < a.size(); ++j) vals.push_back(a[j]);
  }
  for (const auto& bg : params.b) {
    for (int j = 0; j < bg.size(); ++j) vals.push_back(bg[j]);
  }
  for (int h = 0; h < params.delta.size(); ++h) vals.push_back(params.delta[h]);
  for (int k = 0; k < params.Q.rows(); ++k) {
    for (int h = 0; h < params.Q.cols(); ++h) vals.push_back(params.Q(k, h));
  }
  vals.push_back(params.sigma);
  if (spec.prior_mode == PriorMode::kConstantMixture) {
    for (int g = 0; g < params.pi.size(); ++g) vals.push_back(params.pi[g]);
  } else if (spec.G >= 2) {
    for (int g = 0; g < params.lambda0.size(); ++g) {
      vals.push_back(params.lambda0[g]);
    }
    vals.push_back(params.lambda1);
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

namespace {

// replica labels must sort unambiguously (ties in the ordering coordinate
// make label alignment across replicates ill-defined)
bool labels_unambiguous(const ParamSet& params, const ModelSpec& spec) {
  if (spec.m > 1 && params.alpha[0].size() > 0) {
    for (int h = 1; h < spec.m; ++h) {
      if (std::abs(params.alpha[h][0] - params.alpha[h - 1][0]) <= 1e-9) {
        return false;
      }
    }
  }
  if (spec.prior_mode == PriorMode::kConstantMixture && spec.G > 1 &&
      params.b[0].size() > 0) {
    for (int g = 1; g < spec.G; ++g) {
      if (std::abs(params.b[g][0] - params.b[g - 1][0]) <= 1e-9) return false;
    }
  }
  return true;
}

double percentile(std::vector<double> sorted_vals, double q) {
  // type-7 empirical quantile on pre-sorted values
  const int n = static_cast<int>(sorted_vals.size());
  if (n == 1) return sorted_vals[0];
  double pos = q * (n - 1);
  int lo = static_cast<int>(std::floor(pos));
  int hi = std::min(lo + 1, n - 1);
  double frac = pos - lo;
  return sorted_vals[lo] * (1.0 - frac) + sorted_vals[hi] * frac;
}

}  // namespace

BootstrapResult block_bootstrap(const PanelDataset& data,
                                const ModelSpec& spec, const FitResult& fitted,
                                const BootstrapOptions& opts) {
  if (opts.B < 2) {
    fail(ErrorCode::DimensionMismatch, "bootstrap needs B >= 2");
  }
  if (!(opts.level > 0.0 && opts.level < 1.0)) {
    fail(ErrorCode::DimensionMismatch, "bootstrap level must lie in (0,1)");
  }
  const int n = data.n_units();

  BootstrapResult out;
  out.B = opts.B;
  out.param_names = param_names(spec, data);
  out.estimate = flatten_params(fitted.params, spec);

  std::vector<std::optional<Eigen::VectorXd>> reps(opts.B);
  std::vector<bool> ambiguous(opts.B, false);
  FitOptions fit_opts;
  parallel_for(opts.B, opts.jobs, [&](int rep) {
    Rng rng(derive_seed(opts.rng_seed, 0xb0075ULL, rep));
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = static_cast<int>(rng.below(n));
    PanelDataset resampled = data.resample_units(idx);
    try {
      FitResult refit;
      if (opts.warm_start) {
        refit = fit(resampled, spec, fitted.params, fit_opts);
      } else {
        StartConfig cfg = opts.multi_start;
        cfg.rng_seed = derive_seed(opts.rng_seed, 0x57a27ULL, rep);
        refit = multi_start_fit(resampled, spec, cfg, 1, fit_opts);
      }
      if (!labels_unambiguous(refit.params, spec)) {
        ambiguous[rep] = true;
        return;
      }
      reps[rep] = flatten_params(refit.params, spec);
    } catch (const Error&) {
      // failed replicate: dropped and counted
    }
  });

  for (int rep = 0; rep < opts.B; ++rep) {
    if (ambiguous[rep]) ++out.dropped_ambiguous;
    if (reps[rep].has_value()) out.replicates.push_back(*reps[rep]);
  }
  out.B_effective = static_cast<int>(out.replicates.size());
  if (out.B_effective < 0.8 * opts.B) {
    fail(ErrorCode::NoConvergence,
         "more than 20% of bootstrap replicates failed (" +
             std::to_string(opts.B - out.B_effective) + " of " +
             std::to_string(opts.B) + ")");
  }

  const int k = static_cast<int>(out.estimate.size());
  out.ci_lower.resize(k);
  out.ci_upper.resize(k);
  const double a = 1.0 - opts.level;
  for (int j = 0; j < k; ++j) {
    std::vector<double> vals(out.B_effective);
    for (int rep = 0; rep < out.B_effective; ++rep) {
      vals[rep] = out.replicates[rep][j];
    }
    std::sort(vals.begin(), vals.end());
    out.ci_lower[j] = percentile(vals, a / 2.0);
    out.ci_upper[j] = percentile(vals, 1.0 - a / 2.0);
  }
  return out;
}

std::vector<int> classify_components(const PosteriorSet& post) {
  std::vector<int> cls(post.n_units());
  for (int i = 0; i < post.n_units(); ++i) {
    int best = 0;
    for (int g = 1; g < post.G(); ++g) {
      if (post.zeta(i, g) > post.zeta(i, best)) best = g;
    }
    cls[i] = best;
  }
  return cls;
}

double path_log_score(const PanelDataset& data, const ParamSet& params,
                      const ModelSpec& spec, int unit,
                      const std::vector<int>& path, int g) {
  double score = 0.0;
  for (int t = 1; t <= data.T(unit); ++t) {
    int obs = data.obs_index(unit, t);
    int h = path[t - 1];
    double prob = t == 1 ? params.delta[h] : params.Q(path[t - 2], h);
    score += prob > 0.0 ? std::log(prob)
                        : -std::numeric_limits<double>::infinity();
    double mu = data.X().row(obs).dot(params.beta) +
                data.Z().row(obs).dot(params.b[g]) +
                data.W().row(obs).dot(params.alpha[h]);
    score += ald_logdensity(data.y(obs), mu, params.sigma, spec.tau);
  }
  return score;
}

std::vector<std::vector<int>> decode_states(const PanelDataset& data,
                                            const ParamSet& params,
                                            const ModelSpec& spec,
                                            DecodeMode mode) {
  const int n = data.n_units();
  const int m = spec.m;
  std::vector<std::vector<int>> out(n);

  PosteriorSet post = estep(data, params, spec);
  std::vector<int> cls = classify_components(post);

  if (mode == DecodeMode::kLocal) {
    for (int i = 0; i < n; ++i) {
      out[i].resize(data.T(i));
      for (int t = 1; t <= data.T(i); ++t) {
        int best = 0;
        for (int h = 1; h < m; ++h) {
          if (post.u1(i, t, h) > post.u1(i, t, best)) best = h;
        }
        out[i][t - 1] = best;
      }
    }
    return out;
  }

  // Viterbi within each unit's MAP component
  auto logf = obs_logdensities(data, params, spec);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> log_delta(m);
  for (int h = 0; h < m; ++h) {
    log_delta[h] = params.delta[h] > 0.0 ? std::log(params.delta[h]) : kNegInf;
  }
  Eigen::MatrixXd logQ(m, m);
  for (int k = 0; k < m; ++k) {
    for (int h = 0; h < m; ++h) {
      logQ(k, h) = params.Q(k, h) > 0.0 ? std::log(params.Q(k, h)) : kNegInf;
    }
  }
  for (int i = 0; i < n; ++i) {
    const int T_i = data.T(i);
    const int g = cls[i];
    Eigen::MatrixXd score(T_i, m);
    Eigen::MatrixXi back(T_i, m);
    for (int h = 0; h < m; ++h) {
      score(0, h) = log_delta[h] + logf[g][h][data.obs_index(i, 1)];
      back(0, h) = -1;
    }
    for (int t = 2; t <= T_i; ++t) {
      int obs = data.obs_index(i, t);
      for (int h = 0; h < m; ++h) {
        int argk = 0;
        double best = score(t - 2, 0) + logQ(0, h);
        for (int k = 1; k < m; ++k) {
          double cand = score(t - 2, k) + logQ(k, h);
          if (cand > best) {
            best = cand;
            argk = k;
          }
        }
        score(t - 1, h) = best + logf[g][h][obs];
        back(t - 1, h) = argk;
      }
    }
    int h = 0;
    for (int k = 1; k < m; ++k) {
      if (score(T_i - 1, k) > score(T_i - 1, h)) h = k;
    }
    out[i].resize(T_i);
    for (int t = T_i; t >= 1; --t) {
      out[i][t - 1] = h;
      if (t > 1) h = back(t - 1, h);
    }
  }
  return out;
}

}  // namespace qhmm
