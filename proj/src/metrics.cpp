#include "qhmm/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "qhmm/errors.hpp"
#include "qhmm/inference.hpp"
#include "qhmm/parallel.hpp"

namespace qhmm {

BiasRmse bias_rmse(const std::vector<double>& estimates, double truth) {
  if (estimates.empty()) {
    fail(ErrorCode::DimensionMismatch, "bias_rmse needs at least one estimate");
  }
  double mean = 0.0, sq = 0.0;
  for (double e : estimates) {
    mean += e;
    sq += (e - truth) * (e - truth);
  }
  mean /= estimates.size();
  return {mean - truth, std::sqrt(sq / estimates.size())};
}

double adjusted_rand(const std::vector<int>& labels_a,
                     const std::vector<int>& labels_b) {
  if (labels_a.size() != labels_b.size()) {
    fail(ErrorCode::LengthMismatch, "adjusted_rand: label vectors differ in length");
  }
  const int n = static_cast<int>(labels_a.size());
  if (n == 0) fail(ErrorCode::LengthMismatch, "adjusted_rand: empty labels");

  auto compress = [](const std::vector<int>& v) {
    std::vector<int> sorted(v), out(v.size());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (std::size_t j = 0; j < v.size(); ++j) {
      out[j] = static_cast<int>(
          std::lower_bound(sorted.begin(), sorted.end(), v[j]) - sorted.begin());
    }
    return std::pair{out, static_cast<int>(sorted.size())};
  };
  auto [a, ka] = compress(labels_a);
  auto [b, kb] = compress(labels_b);

  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ka, kb);
  for (int j = 0; j < n; ++j) table(a[j], b[j]) += 1.0;

  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0;
  for (int i = 0; i < ka; ++i) {
    for (int j = 0; j < kb; ++j) sum_ij += choose2(table(i, j));
  }
  double sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < ka; ++i) sum_a += choose2(table.row(i).sum());
  for (int j = 0; j < kb; ++j) sum_b += choose2(table.col(j).sum());
  double total = choose2(static_cast<double>(n));
  double expected = sum_a * sum_b / total;
  double maximum = 0.5 * (sum_a + sum_b);
  if (std::abs(maximum - expected) < 1e-12) {
    return 1.0;  // degenerate partitions (all-singletons / one cluster)
  }
  return (sum_ij - expected) / (maximum - expected);
}

std::vector<int> align_by_nearest(const std::vector<Eigen::VectorXd>& fitted,
                                  const std::vector<Eigen::VectorXd>& truth) {
  const int k = static_cast<int>(truth.size());
  std::vector<int> perm(k), best(k);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int j = 0; j < k; ++j) {
      cost += (fitted[perm[j]] - truth[j]).cwiseAbs().sum();
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;  // best[j] = fitted index matched to truth slot j
}

namespace {

struct ReplicateOutcome {
  bool ok = false;
  // [tau][model] -> aligned estimates: alpha (m), beta (p), b (G), and ARI
  std::vector<std::array<std::vector<double>, 2>> estimates;
  std::vector<std::array<double, 2>> ari;
};

}  // namespace

ReplicateStudy run_study(const ScenarioConfig& config,
                         const StudyOptions& opts) {
  if (config.scenario != Scenario::kTwo) {
    fail(ErrorCode::DimensionMismatch,
         "the replicate study protocol is defined for scenario two");
  }
  const int n_tau = static_cast<int>(opts.taus.size());
  const int m = 2, G = 3;

  ReplicateStudy study;
  study.config = config;
  study.B = opts.B;

  std::vector<ReplicateOutcome> outcomes(opts.B);
  parallel_for(opts.B, opts.jobs, [&](int rep) {
    ScenarioConfig cfg = config;
    cfg.rng_seed = derive_seed(config.rng_seed, 0x4e91ULL, rep);
    SimulatedPanel sim = generate_scenario2(cfg);
    ReplicateOutcome& out = outcomes[rep];
    out.estimates.resize(n_tau);
    out.ari.resize(n_tau);
    try {
      for (int ti = 0; ti < n_tau; ++ti) {
        for (int model = 0; model < 2; ++model) {  // 0 = dropout, 1 = mixture
          ModelSpec spec;
          spec.tau = opts.taus[ti];
          spec.m = m;
          spec.G = G;
          spec.prior_mode =
              model == 0 ? PriorMode::kDropout : PriorMode::kConstantMixture;
          spec.eps_em = opts.eps_em;
          spec.max_iter = opts.max_iter;
          StartConfig start = opts.start;
          start.rng_seed = derive_seed(config.rng_seed, 0xf17ULL, rep, model);
          FitResult fit = multi_start_fit(sim.data, spec, start, 1);

          // align states and components to the generating values
          std::vector<int> sperm =
              align_by_nearest(fit.params.alpha, sim.truth.params.alpha);
          std::vector<int> cperm =
              align_by_nearest(fit.params.b, sim.truth.params.b);

          std::vector<double>& est = out.estimates[ti][model];
          for (int h = 0; h < m; ++h) {
            est.push_back(fit.params.alpha[sperm[h]][0]);
          }
          est.push_back(fit.params.beta[0]);
          for (int g = 0; g < G; ++g) {
            est.push_back(fit.params.b[cperm[g]][0]);
          }

          std::vector<int> map_class = classify_components(fit.posterior);
          out.ari[ti][model] = adjusted_rand(map_class, sim.truth.component);
        }
      }
      out.ok = true;
    } catch (const Error&) {
      out.ok = false;
    }
  });

  int ok_count = 0;
  for (const auto& o : outcomes) ok_count += o.ok ? 1 : 0;
  study.failed = opts.B - ok_count;
  if (study.failed > opts.max_failure_rate * opts.B) {
    fail(ErrorCode::NoConvergence,
         "replicate study: " + std::to_string(study.failed) + " of " +
             std::to_string(opts.B) + " replicates failed");
  }

  // truth values (raw and quantile-adjusted intercepts)
  SimulatedPanel probe = generate_scenario2(config);
  const ParamSet& tp = probe.truth.params;
  const char* param_labels[] = {"alpha.1", "alpha.2", "beta", "b.1", "b.2", "b.3"};
  const double truths[] = {tp.alpha[0][0], tp.alpha[1][0], tp.beta[0],
                           tp.b[0][0],     tp.b[1][0],     tp.b[2][0]};

  for (int ti = 0; ti < n_tau; ++ti) {
    double qshift = error_quantile(config.error_dist, opts.taus[ti]);
    for (int model = 0; model < 2; ++model) {
      StudyModelResult res;
      res.model = model == 0 ? "dropout" : "mixture";
      res.tau = opts.taus[ti];
      for (int par = 0; par < 6; ++par) {
        StudyCell cell;
        cell.parameter = param_labels[par];
        cell.truth_raw = truths[par];
        cell.truth_adjusted = par < 2 ? truths[par] + qshift : truths[par];
        for (const auto& o : outcomes) {
          if (o.ok) cell.estimates.push_back(o.estimates[ti][model][par]);
        }
        cell.raw = bias_rmse(cell.estimates, cell.truth_raw);
        cell.adjusted = bias_rmse(cell.estimates, cell.truth_adjusted);
        res.cells.push_back(std::move(cell));
      }
      for (const auto& o : outcomes) {
        if (o.ok) res.ari.push_back(o.ari[ti][model]);
      }
      study.results.push_back(std::move(res));
    }
  }
  return study;
}

}  // namespace qhmm
