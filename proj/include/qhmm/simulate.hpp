#pragma once

#include <cstdint>
#include <functional>

#include "qhmm/model.hpp"
#include "qhmm/panel.hpp"
#include "qhmm/rng.hpp"

namespace qhmm {

enum class Scenario { kOne, kTwo, kCustom };
enum class ErrorDist { kNormal01, kStudentT3, kChiSq2 };
enum class ReffectDist { kNormal01, kStudentT3 };
enum class LambdaSet { kLow, kHigh };    // (1, 2.75, -0.3) / (5, 8.5, -1.1)
enum class DropoutLaw { kUniform1ToT, kUniform2ToT };

std::string error_dist_name(ErrorDist d);
ErrorDist error_dist_from_name(const std::string& name);

struct ScenarioConfig {
  Scenario scenario = Scenario::kTwo;
  int n = 100;
  int T = 5;
  ErrorDist error_dist = ErrorDist::kNormal01;
  ReffectDist reffect_dist = ReffectDist::kNormal01;  // scenario 1 only
  LambdaSet lambda_set = LambdaSet::kHigh;            // scenario 2 only
  DropoutLaw dropout_law = DropoutLaw::kUniform2ToT;  // scenario 2 only
  bool x1_spread_is_sd = false;  // scenario 2: read N(1,3) as sd 3, not var 3
  std::uint64_t rng_seed = 1;
  bool zero_errors = false;   // debug: eps == 0
  double error_scale = 1.0;  // multiplies every error draw
};

struct ScenarioTruth {
  ParamSet params;                       // generating parameters
  ModelSpec spec;                        // matching model orders
  std::vector<int> component;            // per unit (scenario 2; -1 otherwise)
  std::vector<double> reffect;           // per unit b_i (scenario 1)
  std::vector<std::vector<int>> states;  // per unit, per occasion (0-based)
};

struct SimulatedPanel {
  PanelDataset data;
  ScenarioTruth truth;
};

// tau-th quantile of the error distribution (for quantile-adjusted
// intercepts: the generating alpha_h corresponds to alpha_h + F^-1(tau)).
double error_quantile(ErrorDist dist, double tau);

// Drop-out time law: number of observed occasions T_i.
// kUniform2ToT: Pr(T_i = j) = 1/(T-1) for j = 2..T (completer share 1/(T-1));
// kUniform1ToT: Pr(T_i = j) = 1/T for j = 1..T.
int draw_dropout_time(DropoutLaw law, int T, Rng& rng);

// Two-state chain, three drop-out classes, y = alpha_h + b_g x1 + beta x2 + eps.
SimulatedPanel generate_scenario2(const ScenarioConfig& config);

// Two-state chain, continuous random slope on x1, complete panels:
// y = alpha_h + (b_i + beta1) x1 + beta2 x2 + eps, x2 time-constant binary.
SimulatedPanel generate_scenario1(const ScenarioConfig& config);

// Generic generator from an arbitrary ParamSet. The design sampler fills one
// occasion's (x, z, w) rows; errors come from the AL observation model when
// error_law is empty, otherwise from the supplied law.
using DesignSampler =
    std::function<void(int unit, int t, Rng& rng, Eigen::VectorXd& x,
                       Eigen::VectorXd& z, Eigen::VectorXd& w)>;
using ErrorLaw = std::function<double(Rng&)>;

SimulatedPanel generate_from_params(const ParamSet& params,
                                    const ModelSpec& spec, int p, int r, int d,
                                    const DesignSampler& design, int n,
                                    const std::function<int(Rng&)>& T_law,
                                    std::uint64_t seed,
                                    const ErrorLaw& error_law = nullptr);

}  // namespace qhmm
