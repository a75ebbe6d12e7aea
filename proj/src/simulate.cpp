#include "qhmm/simulate.hpp"

#include <cmath>

#include "qhmm/errors.hpp"
#include "qhmm/hmm.hpp"

namespace qhmm {

std::string error_dist_name(ErrorDist d) {
  switch (d) {
    case ErrorDist::kNormal01: return "normal";
    case ErrorDist::kStudentT3: return "t3";
    case ErrorDist::kChiSq2: return "chisq2";
  }
  return "normal";
}

ErrorDist error_dist_from_name(const std::string& name) {
  if (name == "normal") return ErrorDist::kNormal01;
  if (name == "t3") return ErrorDist::kStudentT3;
  if (name == "chisq2") return ErrorDist::kChiSq2;
  fail(ErrorCode::ParseError, "unknown error distribution '" + name +
                                  "' (expected normal|t3|chisq2)");
}

namespace {

double draw_error(ErrorDist dist, Rng& rng) {
  switch (dist) {
    case ErrorDist::kNormal01: return rng.normal();
    case ErrorDist::kStudentT3: return rng.student_t3();
    case ErrorDist::kChiSq2: return rng.chisq2();
  }
  return 0.0;
}

// Acklam's rational approximation of the standard normal quantile,
// polished by one Halley step; |error| < 1e-12 on (0,1).
double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double bq[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double cq[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00, 2.938163982698783e+00};
  static const double dq[] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((cq[0] * q + cq[1]) * q + cq[2]) * q + cq[3]) * q + cq[4]) * q +
         cq[5]) /
        ((((dq[0] * q + dq[1]) * q + dq[2]) * q + dq[3]) * q + 1.0);
  } else if (p <= phigh) {
    double q = p - 0.5, rr = q * q;
    x = (((((a[0] * rr + a[1]) * rr + a[2]) * rr + a[3]) * rr + a[4]) * rr +
         a[5]) *
        q /
        (((((bq[0] * rr + bq[1]) * rr + bq[2]) * rr + bq[3]) * rr + bq[4]) * rr +
         1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((cq[0] * q + cq[1]) * q + cq[2]) * q + cq[3]) * q + cq[4]) * q +
          cq[5]) /
        ((((dq[0] * q + dq[1]) * q + dq[2]) * q + dq[3]) * q + 1.0);
  }
  // Halley refinement against erfc
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

double t3_cdf(double x) {
  // closed form for nu = 3
  double s = x / std::sqrt(3.0);
  return 0.5 + (1.0 / M_PI) * (s / (1.0 + s * s) + std::atan(s));
}

double t3_quantile(double p) {
  double lo = -1e6, hi = 1e6;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (t3_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double error_quantile(ErrorDist dist, double tau) {
  switch (dist) {
    case ErrorDist::kNormal01: return normal_quantile(tau);
    case ErrorDist::kStudentT3: return t3_quantile(tau);
    case ErrorDist::kChiSq2: return -2.0 * std::log1p(-tau);
  }
  return 0.0;
}

int draw_dropout_time(DropoutLaw law, int T, Rng& rng) {
  if (T == 1) return 1;
  if (law == DropoutLaw::kUniform2ToT) {
    return 2 + static_cast<int>(rng.below(T - 1));
  }
  return 1 + static_cast<int>(rng.below(T));
}

SimulatedPanel generate_scenario2(const ScenarioConfig& config) {
  if (config.n < 1 || config.T < 1) {
    fail(ErrorCode::DimensionMismatch, "scenario requires n, T >= 1");
  }
  Rng rng(config.rng_seed);

  ModelSpec spec;
  spec.m = 2;
  spec.G = 3;
  spec.prior_mode = PriorMode::kDropout;

  ParamSet truth;
  truth.beta = Eigen::VectorXd::Constant(1, -0.8);
  truth.alpha = {Eigen::VectorXd::Constant(1, 100.0),
                 Eigen::VectorXd::Constant(1, 102.5)};
  truth.b = {Eigen::VectorXd::Constant(1, 0.5),
             Eigen::VectorXd::Constant(1, 1.5),
             Eigen::VectorXd::Constant(1, 3.0)};
  truth.delta = Eigen::VectorXd(2);
  truth.delta << 0.7, 0.3;
  truth.Q = Eigen::MatrixXd(2, 2);
  truth.Q << 0.7, 0.3, 0.3, 0.7;
  truth.sigma = 1.0;
  truth.lambda0 = Eigen::VectorXd(2);
  if (config.lambda_set == LambdaSet::kLow) {
    truth.lambda0 << 1.0, 2.75;
    truth.lambda1 = -0.3;
  } else {
    truth.lambda0 << 5.0, 8.5;
    truth.lambda1 = -1.1;
  }

  const double x1_sd = config.x1_spread_is_sd ? 3.0 : std::sqrt(3.0);

  std::vector<PanelRecord> records;
  ScenarioTruth tr;
  tr.params = truth;
  tr.spec = spec;
  tr.component.resize(config.n);
  tr.states.resize(config.n);

  for (int i = 0; i < config.n; ++i) {
    int T_i = draw_dropout_time(config.dropout_law, config.T, rng);
    Eigen::VectorXd priors = component_priors(truth, spec, T_i);
    int g = rng.categorical(priors.data(), spec.G);
    tr.component[i] = g;
    int state = rng.categorical(truth.delta.data(), spec.m);
    for (int t = 1; t <= T_i; ++t) {
      if (t > 1) {
        Eigen::VectorXd row = truth.Q.row(state);
        state = rng.categorical(row.data(), spec.m);
      }
      tr.states[i].push_back(state);
      double x1 = 1.0 + x1_sd * rng.normal();
      double x2 = rng.uniform(0.0, 10.0);
      double eps = config.zero_errors ? 0.0
                       : config.error_scale * draw_error(config.error_dist, rng);
      PanelRecord rec;
      rec.unit_id = std::to_string(i + 1);
      rec.time = t;
      rec.y = truth.alpha[state][0] + truth.b[g][0] * x1 +
              truth.beta[0] * x2 + eps;
      rec.x = {x2};
      rec.z = {x1};
      rec.w = {1.0};
      records.push_back(std::move(rec));
    }
  }

  SimulatedPanel out{validate_dataset(std::move(records), {"x2"}, {"x1"},
                                      {"const"}),
                     std::move(tr)};
  return out;
}

SimulatedPanel generate_scenario1(const ScenarioConfig& config) {
  if (config.n < 1 || config.T < 1) {
    fail(ErrorCode::DimensionMismatch, "scenario requires n, T >= 1");
  }
  Rng rng(config.rng_seed);

  ModelSpec spec;
  spec.m = 2;
  spec.G = 1;  // the generating b_i is continuous; G is free at fit time
  spec.prior_mode = PriorMode::kConstantMixture;

  ParamSet truth;
  truth.beta = Eigen::VectorXd(2);
  truth.beta << 2.0, -0.8;  // beta1 (x1 slope), beta2 (x2 slope)
  truth.alpha = {Eigen::VectorXd::Constant(1, 100.0),
                 Eigen::VectorXd::Constant(1, 110.0)};
  truth.b = {Eigen::VectorXd::Zero(1)};
  truth.delta = Eigen::VectorXd(2);
  truth.delta << 0.7, 0.3;
  truth.Q = Eigen::MatrixXd(2, 2);
  truth.Q << 0.8, 0.2, 0.2, 0.8;
  truth.sigma = 1.0;
  truth.pi = Eigen::VectorXd::Constant(1, 1.0);

  std::vector<PanelRecord> records;
  ScenarioTruth tr;
  tr.params = truth;
  tr.spec = spec;
  tr.component.assign(config.n, -1);
  tr.reffect.resize(config.n);
  tr.states.resize(config.n);

  for (int i = 0; i < config.n; ++i) {
    double b_i = config.reffect_dist == ReffectDist::kNormal01
                     ? rng.normal()
                     : rng.student_t3();
    tr.reffect[i] = b_i;
    double x2 = rng.uniform() < 0.5 ? 1.0 : 0.0;  // time-constant binary
    int state = rng.categorical(truth.delta.data(), spec.m);
    for (int t = 1; t <= config.T; ++t) {
      if (t > 1) {
        Eigen::VectorXd row = truth.Q.row(state);
        state = rng.categorical(row.data(), spec.m);
      }
      tr.states[i].push_back(state);
      double x1 = rng.uniform(-10.0, 10.0);
      double eps = config.zero_errors ? 0.0
                       : config.error_scale * draw_error(config.error_dist, rng);
      PanelRecord rec;
      rec.unit_id = std::to_string(i + 1);
      rec.time = t;
      rec.y = truth.alpha[state][0] + (b_i + truth.beta[0]) * x1 +
              truth.beta[1] * x2 + eps;
      rec.x = {x1, x2};
      rec.z = {x1};  // random slope shares the x1 column
      rec.w = {1.0};
      records.push_back(std::move(rec));
    }
  }

  SimulatedPanel out{validate_dataset(std::move(records), {"x1", "x2"}, {"x1"},
                                      {"const"}),
                     std::move(tr)};
  return out;
}

SimulatedPanel generate_from_params(const ParamSet& params,
                                    const ModelSpec& spec, int p, int r, int d,
                                    const DesignSampler& design, int n,
                                    const std::function<int(Rng&)>& T_law,
                                    std::uint64_t seed,
                                    const ErrorLaw& error_law) {
  Rng rng(seed);
  std::vector<PanelRecord> records;
  ScenarioTruth tr;
  tr.params = params;
  tr.spec = spec;
  tr.component.resize(n);
  tr.states.resize(n);

  Eigen::VectorXd x(p), z(r), w(d);
  for (int i = 0; i < n; ++i) {
    int T_i = T_law(rng);
    Eigen::VectorXd priors = component_priors(params, spec, T_i);
    int g = rng.categorical(priors.data(), spec.G);
    tr.component[i] = g;
    int state = rng.categorical(params.delta.data(), spec.m);
    for (int t = 1; t <= T_i; ++t) {
      if (t > 1) {
        Eigen::VectorXd row = params.Q.row(state);
        state = rng.categorical(row.data(), spec.m);
      }
      tr.states[i].push_back(state);
      design(i, t, rng, x, z, w);
      double mu = x.dot(params.beta) + z.dot(params.b[g]) +
                  w.dot(params.alpha[state]);
      double eps = error_law ? error_law(rng) : rng.ald(params.sigma, spec.tau);
      PanelRecord rec;
      rec.unit_id = std::to_string(i + 1);
      rec.time = t;
      rec.y = mu + eps;
      rec.x.assign(x.data(), x.data() + p);
      rec.z.assign(z.data(), z.data() + r);
      rec.w.assign(w.data(), w.data() + d);
      records.push_back(std::move(rec));
    }
  }
  SimulatedPanel out{validate_dataset(std::move(records)), std::move(tr)};
  return out;
}

}  // namespace qhmm
