#pragma once

// Independent oracles used by the test suites. Everything here recomputes
// quantities by brute force (path enumeration, quadrature, grid search) and
// must stay independent of the library's own recursion/solver code paths.

#include <functional>
#include <vector>

#include "qhmm/model.hpp"
#include "qhmm/panel.hpp"
#include "qhmm/rng.hpp"

namespace qhmm::testing {

// Posteriors and log-likelihood by explicit summation over all state paths
// and components (m^T_i * G terms per unit).
struct EnumeratedPosteriors {
  std::vector<double> per_unit_loglik;
  double total_loglik = 0.0;
  // same indexing as PosteriorSet accessors
  std::function<double(int, int, int)> u1;            // (i, t, h)
  std::function<double(int, int, int, int)> u2;       // (i, t, k, h), t >= 2
  std::function<double(int, int)> zeta;               // (i, g)
  std::function<double(int, int, int, int)> ucond;    // (i, t, h, g)
};

EnumeratedPosteriors enumerate_posteriors(const PanelDataset& data,
                                          const ParamSet& params,
                                          const ModelSpec& spec);

// Golden-section maximizer of a unimodal function on [lo, hi].
double golden_section_max(const std::function<double(double)>& f, double lo,
                          double hi, double tol = 1e-10);

// Trapezoid-rule integral of f on [lo, hi] with n panels.
double trapezoid(const std::function<double(double)>& f, double lo, double hi,
                 int n);

// Small random estimation instance: dataset plus a valid parameter set of
// matching dimensions (benign magnitudes; used by enumeration cross-checks).
struct SmallInstance {
  PanelDataset data;
  ParamSet params;
  ModelSpec spec;
};

SmallInstance random_instance(Rng& rng, int n_max = 5, int T_max = 4,
                              int m_max = 2, int G_max = 2,
                              bool allow_dropout_mode = true);

// Random valid parameter set for given dimensions.
ParamSet random_params(Rng& rng, const ModelSpec& spec, int p, int r, int d);

}  // namespace qhmm::testing
