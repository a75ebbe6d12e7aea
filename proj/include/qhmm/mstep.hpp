#pragma once

#include "qhmm/model.hpp"
#include "qhmm/panel.hpp"
#include "qhmm/quantile.hpp"

namespace qhmm {

struct MStepReport {
  ParamSet updated;
  double block_objective_before = 0.0;  // total weighted check loss
  double block_objective_after = 0.0;
  bool lambda_converged = true;
  int empty_state_events = 0;
  int empty_component_events = 0;
  bool lambda_clamped = false;
  bool sigma_floored = false;
};

// delta_h = mean_i u_i1(h); q_kh = sum u_it(k,h) / sum_h' u_it(k,h'), rows
// renormalized. A state whose occupancy falls below 1e-10 gets a uniform row
// (counted in the report's empty_state_events by the caller via the pair's
// second element).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> update_initial_transition(
    const PosteriorSet& post, const PanelDataset& data, int m,
    int* empty_state_events = nullptr);

// Cyclic block minimization of the posterior-weighted check loss over
// (beta, alpha_1..m, b_1..G) with Gauss-Seidel partial residuals, until the
// total objective decreases by < 1e-8 relative or 25 cycles.
struct LongitudinalBlockResult {
  Eigen::VectorXd beta;
  std::vector<Eigen::VectorXd> alpha;
  std::vector<Eigen::VectorXd> b;
  double objective_before = 0.0;
  double objective_after = 0.0;
  int empty_state_events = 0;
  int empty_component_events = 0;
};

LongitudinalBlockResult update_longitudinal_block(const PanelDataset& data,
                                                  const PosteriorSet& post,
                                                  const ParamSet& params,
                                                  const ModelSpec& spec,
                                                  const QrOptions& qr_opts = {});

// Constant mixture: closed-form pi_g = mean_i zeta_ig. Drop-out mode:
// (lambda0, lambda1) maximizing sum_i sum_g zeta_ig log pi_ig(T_i) under the
// nondecreasing-lambda0 constraint (BFGS on the exp-gap reparameterization,
// warm-started at the incoming lambda; never worse than the start).
struct PriorUpdate {
  Eigen::VectorXd pi;       // constant mode
  Eigen::VectorXd lambda0;  // drop-out mode
  double lambda1 = 0.0;
  bool converged = true;
  bool clamped = false;  // |lambda| hit the +/-50 box (separation)
};

PriorUpdate update_mixture_priors(const PosteriorSet& post,
                                  const PanelDataset& data,
                                  const ModelSpec& spec,
                                  const ParamSet& current);

// sigma_hat = [sum_i T_i]^-1 sum_{i,t,h,g} zeta_ig u_it(h|g) rho_tau(resid);
// clamped below at 1e-8 (floored flag set).
double update_sigma(const PanelDataset& data, const PosteriorSet& post,
                    const ParamSet& params, const ModelSpec& spec,
                    bool* floored = nullptr);

// Full M-step in the order delta/Q -> longitudinal blocks -> priors -> sigma.
MStepReport mstep(const PanelDataset& data, const PosteriorSet& post,
                  const ParamSet& params, const ModelSpec& spec,
                  const QrOptions& qr_opts = {});

// Total weighted check loss at the given parameters (the longitudinal part
// of the EM auxiliary function, up to the 1/sigma factor).
double longitudinal_objective(const PanelDataset& data,
                              const PosteriorSet& post,
                              const ParamSet& params, const ModelSpec& spec);

}  // namespace qhmm
