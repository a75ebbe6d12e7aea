#pragma once

#include <cstdint>

#include "qhmm/em.hpp"
#include "qhmm/model.hpp"
#include "qhmm/panel.hpp"

namespace qhmm {

struct BootstrapOptions {
  int B = 100;
  double level = 0.95;
  std::uint64_t rng_seed = 1;
  bool warm_start = true;  // refit from the point estimate; false = multi-start
  StartConfig multi_start;  // used when warm_start is false
  int jobs = 1;
};

struct BootstrapResult {
  int B = 0;
  int B_effective = 0;                     // replicates that refit successfully
  std::vector<std::string> param_names;    // flattened parameter order
  Eigen::VectorXd estimate;                // point fit, same order
  std::vector<Eigen::VectorXd> replicates; // label-aligned parameter vectors
  Eigen::VectorXd ci_lower, ci_upper;      // percentile bounds at the level
  int dropped_ambiguous = 0;               // label sort was not unique
};

// Flattened, named parameter vector in the kv-document order (beta.*,
// alpha.h.*, b.g.*, delta.h, Q.k.h, sigma, pi.g / lambda0.g + lambda1).
std::vector<std::string> param_names(const ModelSpec& spec,
                                     const PanelDataset& data);
Eigen::VectorXd flatten_params(const ParamSet& params, const ModelSpec& spec);

// Nonparametric block bootstrap: resamples unit indices with replacement
// (whole sequences), refits each replicate, percentile CIs per parameter.
// Errors if more than 20% of replicates fail.
BootstrapResult block_bootstrap(const PanelDataset& data, const ModelSpec& spec,
                                const FitResult& fitted,
                                const BootstrapOptions& opts);

// MAP component membership: argmax_g zeta_ig, ties toward smaller g.
std::vector<int> classify_components(const PosteriorSet& post);

enum class DecodeMode { kLocal, kViterbi };

// Per-(unit, occasion) state decode: local posterior argmax, or the Viterbi
// path within each unit's MAP component.
std::vector<std::vector<int>> decode_states(const PanelDataset& data,
                                            const ParamSet& params,
                                            const ModelSpec& spec,
                                            DecodeMode mode);

// Joint path score log[delta_{s1} prod q prod f(y|s_t, g)] for a given unit,
// path, and component (used to compare decodings).
double path_log_score(const PanelDataset& data, const ParamSet& params,
                      const ModelSpec& spec, int unit,
                      const std::vector<int>& path, int g);

}  // namespace qhmm
