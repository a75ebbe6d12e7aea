#pragma once

#include <cstdint>
#include <optional>

#include "qhmm/model.hpp"
#include "qhmm/panel.hpp"
#include "qhmm/quantile.hpp"
#include "qhmm/rng.hpp"

namespace qhmm {

struct StartConfig {
  int n_random_starts = 30;   // total starts (1 deterministic + rest random)
  double s_diag = 1.0;        // transition diagonal boost
  double perturb_scale = 0.5;
  std::uint64_t rng_seed = 1;
};

// Deterministic start: uniform delta, q_kh = (1 + s 1{h=k})/(m + s), location
// parameters from a pooled (unit-weight) quantile regression with
// Gauss-Hermite node offsets spreading alpha_h / b_g, sigma from the pooled
// mean check loss, uniform priors (or logit-of-uniform-cumulative lambda0).
ParamSet deterministic_start(const PanelDataset& data, const ModelSpec& spec,
                             double s_diag = 1.0);

// Random perturbation of a deterministic start: relative uniform noise on
// location parameters, renormalized jitter on probability rows, lognormal
// jitter on sigma. perturb_scale = 0 is the identity.
ParamSet random_start(const ParamSet& det, const PanelDataset& data,
                      const ModelSpec& spec, double perturb_scale, Rng& rng);

// Gauss-Hermite nodes (ascending) of order n, weight function exp(-x^2/2)
// (probabilists' convention), via the Golub-Welsch tridiagonal eigenproblem.
Eigen::VectorXd gauss_hermite_nodes(int n);

struct FitOptions {
  QrOptions qr;
  bool sort_labels = true;  // order states/components after convergence
};

// EM iteration until the relative log-likelihood change falls below
// spec.eps_em or spec.max_iter is reached. Throws NonFiniteLikelihood and
// DegenerateFit (AL scale floor).
FitResult fit(const PanelDataset& data, const ModelSpec& spec,
              const ParamSet& start, const FitOptions& opts = {});

// Deterministic start + (n_random_starts - 1) random starts; keeps the
// highest final log-likelihood. Start jobs run on `jobs` threads with
// per-start derived seeds. Throws AllStartsFailed.
FitResult multi_start_fit(const PanelDataset& data, const ModelSpec& spec,
                          const StartConfig& cfg, int jobs = 1,
                          const FitOptions& opts = {});

// Free-parameter count: p + m d + G r + (m-1) + m(m-1) + 1 + prior params.
int count_params(const ModelSpec& spec, int p, int r, int d);

double bic_value(double loglik, int n_params, double basis);

struct GridCell {
  int m = 0, G = 0;
  bool available = false;
  bool chosen = false;
  std::string error;
  std::optional<FitResult> result;
};

struct SelectionResult {
  std::vector<GridCell> grid;
  int best_index = -1;  // argmin BIC over available cells
};

// multi_start_fit at each (m, G) grid point; chosen = argmin BIC.
SelectionResult select_model(const PanelDataset& data,
                             const std::vector<int>& m_values,
                             const std::vector<int>& G_values, double tau,
                             PriorMode mode, const StartConfig& cfg,
                             int jobs = 1, const FitOptions& opts = {},
                             double eps_em = 1e-8, int max_iter = 500);

}  // namespace qhmm
