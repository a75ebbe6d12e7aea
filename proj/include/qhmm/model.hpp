#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "qhmm/panel.hpp"

namespace qhmm {

enum class PriorMode { kConstantMixture, kDropout };

std::string prior_mode_name(PriorMode mode);
PriorMode prior_mode_from_name(const std::string& name);

struct ModelSpec {
  double tau = 0.5;
  int m = 1;  // hidden states
  int G = 1;  // mixture components / drop-out classes
  PriorMode prior_mode = PriorMode::kConstantMixture;
  double eps_em = 1e-8;
  int max_iter = 500;

  void validate() const;  // throws DimensionMismatch on bad fields
};

// Full parameter vector Phi. delta/Q govern the hidden chain, beta/alpha/b
// the location model, sigma the AL scale, and either pi (constant mixture
// masses) or (lambda0, lambda1) (cumulative-logit drop-out class model).
struct ParamSet {
  Eigen::VectorXd beta;                // p
  std::vector<Eigen::VectorXd> alpha;  // m vectors of length d
  std::vector<Eigen::VectorXd> b;      // G vectors of length r
  Eigen::VectorXd delta;               // m, sums to 1
  Eigen::MatrixXd Q;                   // m x m, row-stochastic
  double sigma = 1.0;
  Eigen::VectorXd pi;       // G (constant-mixture mode)
  Eigen::VectorXd lambda0;  // G-1, nondecreasing (drop-out mode)
  double lambda1 = 0.0;

  // Throws DimensionMismatch / NonPositiveScale on violated invariants
  // (probability sums within 1e-10, lambda0 monotone, sigma > 0).
  void validate(const ModelSpec& spec, int p, int r, int d) const;
};

// E-step posterior expectations, ragged over observed occasions.
// u_single(i,t,h) sums to 1 over h; u_pair(i,t,k,h) covers t >= 2; zeta(i,g)
// sums to 1 over g; u_cond(i,t,h,g) sums to 1 over h for each g.
class PosteriorSet {
 public:
  PosteriorSet() = default;
  PosteriorSet(const PanelDataset& data, int m, int G);

  int m() const { return m_; }
  int G() const { return G_; }
  int n_units() const { return n_units_; }

  double& u1(int i, int t, int h) {  // t is 1-based
    return u_single_[(obs_offset_[i] + t - 1) * m_ + h];
  }
  double u1(int i, int t, int h) const {
    return u_single_[(obs_offset_[i] + t - 1) * m_ + h];
  }
  double& u2(int i, int t, int k, int h) {  // t >= 2
    return u_pair_[(pair_offset_[i] + t - 2) * m_ * m_ + k * m_ + h];
  }
  double u2(int i, int t, int k, int h) const {
    return u_pair_[(pair_offset_[i] + t - 2) * m_ * m_ + k * m_ + h];
  }
  double& zeta(int i, int g) { return zeta_[i * G_ + g]; }
  double zeta(int i, int g) const { return zeta_[i * G_ + g]; }
  double& ucond(int i, int t, int h, int g) {
    return u_cond_[((obs_offset_[i] + t - 1) * m_ + h) * G_ + g];
  }
  double ucond(int i, int t, int h, int g) const {
    return u_cond_[((obs_offset_[i] + t - 1) * m_ + h) * G_ + g];
  }

  // flat obs-indexed accessors used by the M-step inner loops
  double u1_obs(int obs, int h) const { return u_single_[obs * m_ + h]; }
  double ucond_obs(int obs, int h, int g) const {
    return u_cond_[(obs * m_ + h) * G_ + g];
  }

  void permute_states(const std::vector<int>& perm);      // new[h] = old[perm[h]]
  void permute_components(const std::vector<int>& perm);  // new[g] = old[perm[g]]

 private:
  int m_ = 0, G_ = 0, n_units_ = 0;
  std::vector<int> obs_offset_, pair_offset_, T_;
  std::vector<double> u_single_, u_pair_, zeta_, u_cond_;
};

struct FitDiagnostics {
  int empty_state_events = 0;
  int empty_component_events = 0;
  bool lambda_clamped = false;
  bool sigma_floored = false;
  std::vector<double> start_logliks;  // final loglik of each start (NaN = failed)
};

struct FitResult {
  ModelSpec spec;
  ParamSet params;
  std::vector<double> loglik_trace;
  double final_loglik = 0.0;
  double bic = 0.0;    // basis: total observation count
  double bic_n = 0.0;  // basis: number of units
  int n_params = 0;
  PosteriorSet posterior;
  bool converged = false;
  int n_iter = 0;
  FitDiagnostics diagnostics;
};

}  // namespace qhmm
