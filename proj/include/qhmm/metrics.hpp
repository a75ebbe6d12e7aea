#pragma once

#include <map>

#include "qhmm/em.hpp"
#include "qhmm/simulate.hpp"

namespace qhmm {

struct BiasRmse {
  double bias = 0.0;
  double rmse = 0.0;
};

// bias = mean(estimates) - truth; rmse = sqrt(mean((estimates - truth)^2)).
BiasRmse bias_rmse(const std::vector<double>& estimates, double truth);

// Hubert-Arabie adjusted Rand index between two partitions; 1 for identical
// partitions up to relabeling, expected 0 under independence.
// Throws LengthMismatch.
double adjusted_rand(const std::vector<int>& labels_a,
                     const std::vector<int>& labels_b);

struct StudyOptions {
  int B = 50;                 // replicates
  std::vector<double> taus = {0.5};
  StartConfig start;
  double eps_em = 1e-8;
  int max_iter = 500;
  int jobs = 1;
  double max_failure_rate = 0.10;
};

// One replicate x tau x model summary row.
struct StudyCell {
  std::string parameter;  // alpha.1, alpha.2, beta, b.1, b.2, b.3
  double truth_raw = 0.0;
  double truth_adjusted = 0.0;  // intercepts shifted by the error tau-quantile
  std::vector<double> estimates;
  BiasRmse raw;
  BiasRmse adjusted;
};

struct StudyModelResult {
  std::string model;  // "mixture" (constant priors) or "dropout"
  double tau = 0.0;
  std::vector<StudyCell> cells;
  std::vector<double> ari;  // per replicate, vs the true drop-out classes
};

struct ReplicateStudy {
  ScenarioConfig config;
  int B = 0;
  int failed = 0;
  std::vector<StudyModelResult> results;  // per (tau, model)
};

// Scenario-2 replicate study: per replicate generate, fit the drop-out-class
// model and the constant-mixture model at each tau, align labels to truth by
// minimal total |distance| assignment over (alpha, b), accumulate bias/RMSE
// and the ARI of MAP components vs true classes. Errors if more than
// max_failure_rate of replicates fail.
ReplicateStudy run_study(const ScenarioConfig& config, const StudyOptions& opts);

// Minimal-total-|distance| assignment between fitted and generating location
// vectors (first coordinates); brute force over permutations (sizes <= 8).
std::vector<int> align_by_nearest(const std::vector<Eigen::VectorXd>& fitted,
                                  const std::vector<Eigen::VectorXd>& truth);

}  // namespace qhmm
