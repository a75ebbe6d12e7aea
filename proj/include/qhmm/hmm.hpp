#pragma once

#include <vector>

#include "qhmm/model.hpp"
#include "qhmm/panel.hpp"

namespace qhmm {

// log-space forward/backward variables, stored per component g as flat
// [obs * m + h] arrays over the dataset's observation rows.
// At t = T_i the backward log-value is 0 for all (h, g).
struct ForwardBackwardTable {
  int m = 0, G = 0;
  std::vector<std::vector<double>> log_fwd;  // [g][obs*m + h]
  std::vector<std::vector<double>> log_bwd;  // [g][obs*m + h]
  std::vector<double> per_unit_loglik;       // [i], filled by forward()
  double total_loglik = 0.0;
};

// log of sum of exp over a contiguous range; returns -inf for empty/all -inf.
double logsumexp(const double* v, int n);

// Component prior pi_ig: constant-mixture mass pi_g, or the difference of
// adjacent cumulative logits F(lambda0_g + lambda1 T_i) evaluated at the
// unit's number of observed occasions.
double component_prior(const ParamSet& params, const ModelSpec& spec, int T_i,
                       int g);

// All component priors for one unit (sums to 1 over g).
Eigen::VectorXd component_priors(const ParamSet& params, const ModelSpec& spec,
                                 int T_i);

// Per-(obs,h,g) ALD log densities of the observations given state h and
// component g: out[g][h][obs]. Shared input of forward/backward.
std::vector<std::vector<std::vector<double>>> obs_logdensities(
    const PanelDataset& data, const ParamSet& params, const ModelSpec& spec);

// Forward recursion + per-unit observed-data log-likelihood.
// Throws NonFiniteLikelihood if any unit's likelihood is -inf/NaN.
ForwardBackwardTable forward(const PanelDataset& data, const ParamSet& params,
                             const ModelSpec& spec);

// Adds the backward recursion to a forward table (or computes standalone).
void backward(const PanelDataset& data, const ParamSet& params,
              const ModelSpec& spec, ForwardBackwardTable& table);

// Full E-step: all four posterior families, computed in log space.
PosteriorSet estep(const PanelDataset& data, const ParamSet& params,
                   const ModelSpec& spec);

// E-step reusing a completed forward/backward table.
PosteriorSet estep(const PanelDataset& data, const ParamSet& params,
                   const ModelSpec& spec, const ForwardBackwardTable& table,
                   const std::vector<std::vector<std::vector<double>>>& logf);

// Observed-data log-likelihood only (forward pass).
double observed_loglik(const PanelDataset& data, const ParamSet& params,
                       const ModelSpec& spec);

// One-pass E-step + log-likelihood at the same parameter point (the EM
// driver's per-iteration workhorse; densities computed once).
struct EStepResult {
  PosteriorSet posterior;
  double loglik = 0.0;
  std::vector<double> per_unit_loglik;
};

EStepResult estep_with_loglik(const PanelDataset& data, const ParamSet& params,
                              const ModelSpec& spec);

}  // namespace qhmm
