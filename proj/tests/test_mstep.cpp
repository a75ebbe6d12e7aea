#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qhmm/hmm.hpp"
#include "qhmm/mstep.hpp"
#include "qhmm/quantile.hpp"
#include "qhmm/rng.hpp"
#include "support/oracles.hpp"

using namespace qhmm;
using qhmm::testing::random_instance;

TEST_CASE("delta/Q updates: pinned cases and stochasticity") {
  // two units, all u1 mass split between states -> delta = (1/2, 1/2)
  std::vector<PanelRecord> records;
  for (int i = 0; i < 2; ++i) {
    for (int t = 1; t <= 2; ++t) {
      PanelRecord rec;
      rec.unit_id = std::to_string(i);
      rec.time = t;
      rec.y = 0.0;
      rec.x = {1.0};
      rec.z = {1.0};
      rec.w = {1.0};
      records.push_back(rec);
    }
  }
  PanelDataset data = validate_dataset(records);
  PosteriorSet post(data, 2, 1);
  post.u1(0, 1, 0) = 1.0;
  post.u1(1, 1, 1) = 1.0;
  // all pair mass on 1 -> 1
  post.u2(0, 2, 0, 0) = 1.0;
  post.u2(1, 2, 0, 0) = 1.0;
  auto [delta, Q] = update_initial_transition(post, data, 2);
  CHECK(delta[0] == doctest::Approx(0.5));
  CHECK(delta[1] == doctest::Approx(0.5));
  CHECK(Q(0, 0) == doctest::Approx(1.0));
  CHECK(Q(0, 1) == doctest::Approx(0.0));
  // state 2 row had no occupancy: uniform fallback, reported
  CHECK(Q(1, 0) == doctest::Approx(0.5));

  Rng rng(83);
  for (int rep = 0; rep < 20; ++rep) {
    auto inst = random_instance(rng);
    PosteriorSet p = estep(inst.data, inst.params, inst.spec);
    auto [dhat, Qhat] = update_initial_transition(p, inst.data, inst.spec.m);
    CHECK(dhat.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 0; k < inst.spec.m; ++k) {
      CHECK(Qhat.row(k).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("m=1, G=1 longitudinal block equals a joint weighted QR fit") {
  // 30-obs instance; total objective of the partitioned cyclic fit must match
  // a single joint QR on the concatenated design
  Rng rng(89);
  std::vector<PanelRecord> records;
  for (int i = 0; i < 10; ++i) {
    for (int t = 1; t <= 3; ++t) {
      PanelRecord rec;
      rec.unit_id = std::to_string(i);
      rec.time = t;
      rec.x = {rng.normal()};
      rec.z = {rng.normal()};
      rec.w = {1.0};
      rec.y = 1.5 * rec.x[0] - 0.7 * rec.z[0] + 2.0 + rng.normal();
      records.push_back(rec);
    }
  }
  PanelDataset data = validate_dataset(records);
  ModelSpec spec;
  spec.m = 1;
  spec.G = 1;
  spec.tau = 0.5;

  PosteriorSet post(data, 1, 1);
  for (int i = 0; i < data.n_units(); ++i) {
    post.zeta(i, 0) = 1.0;
    for (int t = 1; t <= data.T(i); ++t) {
      post.u1(i, t, 0) = 1.0;
      post.ucond(i, t, 0, 0) = 1.0;
      if (t >= 2) post.u2(i, t, 0, 0) = 1.0;
    }
  }
  ParamSet params;
  params.beta = Eigen::VectorXd::Zero(1);
  params.alpha = {Eigen::VectorXd::Zero(1)};
  params.b = {Eigen::VectorXd::Zero(1)};
  params.delta = Eigen::VectorXd::Ones(1);
  params.Q = Eigen::MatrixXd::Ones(1, 1);
  params.sigma = 1.0;
  params.pi = Eigen::VectorXd::Ones(1);

  auto block = update_longitudinal_block(data, post, params, spec);

  // joint oracle: LP on [x z w]
  Eigen::MatrixXd J(data.n_obs(), 3);
  J << data.X(), data.Z(), data.W();
  Eigen::VectorXd yv = Eigen::VectorXd::Map(data.y().data(), data.n_obs());
  Eigen::VectorXd joint =
      weighted_qr_lp_oracle(J, yv, Eigen::VectorXd::Ones(data.n_obs()), 0.5);
  double joint_obj = qr_objective(J, yv, Eigen::VectorXd::Ones(data.n_obs()),
                                  0.5, joint);
  CHECK(block.objective_after ==
        doctest::Approx(joint_obj).epsilon(1e-6));
}

TEST_CASE("zero-residual synthetic data recovers the generating values") {
  Rng rng(97);
  ModelSpec spec;
  spec.m = 2;
  spec.G = 2;
  spec.tau = 0.3;
  Eigen::VectorXd beta_true(1);
  beta_true << -1.2;
  std::vector<Eigen::VectorXd> alpha_true = {Eigen::VectorXd::Constant(1, 1.0),
                                             Eigen::VectorXd::Constant(1, 4.0)};
  std::vector<Eigen::VectorXd> b_true = {Eigen::VectorXd::Constant(1, 0.5),
                                         Eigen::VectorXd::Constant(1, 2.5)};
  std::vector<PanelRecord> records;
  std::vector<int> unit_g;
  std::vector<std::vector<int>> unit_states;
  for (int i = 0; i < 12; ++i) {
    int g = i % 2;
    unit_g.push_back(g);
    std::vector<int> states;
    for (int t = 1; t <= 4; ++t) {
      int h = (i + t) % 2;
      states.push_back(h);
      PanelRecord rec;
      rec.unit_id = std::to_string(i);
      rec.time = t;
      rec.x = {rng.normal()};
      rec.z = {rng.normal() + 1.0};
      rec.w = {1.0};
      rec.y = beta_true[0] * rec.x[0] + b_true[g][0] * rec.z[0] +
              alpha_true[h][0];
      records.push_back(rec);
    }
    unit_states.push_back(states);
  }
  PanelDataset data = validate_dataset(records);

  // degenerate posteriors at the generating structure
  PosteriorSet post(data, 2, 2);
  for (int i = 0; i < data.n_units(); ++i) {
    post.zeta(i, unit_g[i]) = 1.0;
    for (int t = 1; t <= data.T(i); ++t) {
      int h = unit_states[i][t - 1];
      post.u1(i, t, h) = 1.0;
      post.ucond(i, t, h, unit_g[i]) = 1.0;
      if (t >= 2) post.u2(i, t, unit_states[i][t - 2], h) = 1.0;
    }
  }
  ParamSet params;
  params.beta = Eigen::VectorXd::Zero(1);
  params.alpha = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.1)};
  params.b = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.1)};
  params.delta = Eigen::VectorXd::Constant(2, 0.5);
  params.Q = Eigen::MatrixXd::Constant(2, 2, 0.5);
  params.sigma = 1.0;
  params.pi = Eigen::VectorXd::Constant(2, 0.5);

  auto block = update_longitudinal_block(data, post, params, spec);
  CHECK(block.beta[0] == doctest::Approx(beta_true[0]).epsilon(1e-6));
  CHECK(block.alpha[0][0] == doctest::Approx(alpha_true[0][0]).epsilon(1e-6));
  CHECK(block.alpha[1][0] == doctest::Approx(alpha_true[1][0]).epsilon(1e-6));
  CHECK(block.b[0][0] == doctest::Approx(b_true[0][0]).epsilon(1e-6));
  CHECK(block.b[1][0] == doctest::Approx(b_true[1][0]).epsilon(1e-6));
  CHECK(block.objective_after <= 1e-9);
}

TEST_CASE("block update never increases the weighted check loss") {
  Rng rng(101);
  for (int rep = 0; rep < 15; ++rep) {
    auto inst = random_instance(rng);
    while (inst.data.n_obs() < 3) {  // p=2 needs a non-singular pooled design
      inst = random_instance(rng);
    }
    PosteriorSet post = estep(inst.data, inst.params, inst.spec);
    auto block = update_longitudinal_block(inst.data, post, inst.params, inst.spec);
    CHECK(block.objective_after <= block.objective_before + 1e-10);
  }
}

TEST_CASE("constant-mixture prior update: closed form") {
  Rng rng(103);
  auto inst = random_instance(rng, 5, 3, 2, 2, /*allow_dropout_mode=*/false);
  PosteriorSet post = estep(inst.data, inst.params, inst.spec);
  PriorUpdate upd = update_mixture_priors(post, inst.data, inst.spec, inst.params);
  for (int g = 0; g < inst.spec.G; ++g) {
    double mean = 0.0;
    for (int i = 0; i < inst.data.n_units(); ++i) mean += post.zeta(i, g);
    mean /= inst.data.n_units();
    CHECK(upd.pi[g] == doctest::Approx(mean).epsilon(1e-12));
  }
  CHECK(upd.pi.sum() == doctest::Approx(1.0).epsilon(1e-12));

  // all mass on g = 1 -> pi = (1, 0)
  PosteriorSet degenerate(inst.data, inst.spec.m, 2);
  for (int i = 0; i < inst.data.n_units(); ++i) degenerate.zeta(i, 0) = 1.0;
  ModelSpec spec2 = inst.spec;
  spec2.G = 2;
  PriorUpdate upd2 = update_mixture_priors(degenerate, inst.data, spec2,
                                           testing::random_params(rng, spec2, 2, 1, 1));
  CHECK(upd2.pi[0] == doctest::Approx(1.0));
  CHECK(upd2.pi[1] == doctest::Approx(0.0));
}

namespace {

// builds a dataset with the given per-unit T values (content irrelevant for
// the lambda update, which only uses zeta and T_i)
PanelDataset panel_with_T(const std::vector<int>& T_values) {
  std::vector<PanelRecord> records;
  for (std::size_t i = 0; i < T_values.size(); ++i) {
    for (int t = 1; t <= T_values[i]; ++t) {
      PanelRecord rec;
      rec.unit_id = std::to_string(i);
      rec.time = t;
      rec.y = 0.0;
      rec.x = {1.0};
      rec.z = {1.0};
      rec.w = {1.0};
      records.push_back(rec);
    }
  }
  return validate_dataset(records);
}

double lambda_objective(const PanelDataset& data, const PosteriorSet& post,
                        const ModelSpec& spec, const Eigen::VectorXd& lambda0,
                        double lambda1) {
  ParamSet p;
  p.lambda0 = lambda0;
  p.lambda1 = lambda1;
  double acc = 0.0;
  for (int i = 0; i < data.n_units(); ++i) {
    Eigen::VectorXd pr = component_priors(p, spec, data.T(i));
    for (int g = 0; g < spec.G; ++g) {
      acc += post.zeta(i, g) * std::log(std::max(pr[g], 1e-300));
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("lambda update: zeta rows independent of T give lambda1 near 0") {
  Rng rng(107);
  std::vector<int> T_values;
  for (int i = 0; i < 200; ++i) T_values.push_back(1 + (i % 5));
  PanelDataset data = panel_with_T(T_values);
  ModelSpec spec;
  spec.m = 1;
  spec.G = 3;
  spec.prior_mode = PriorMode::kDropout;
  PosteriorSet post(data, 1, 3);
  for (int i = 0; i < data.n_units(); ++i) {
    post.zeta(i, 0) = 0.2;
    post.zeta(i, 1) = 0.5;
    post.zeta(i, 2) = 0.3;
  }
  ParamSet cur = testing::random_params(rng, spec, 1, 1, 1);
  PriorUpdate upd = update_mixture_priors(post, data, spec, cur);
  CHECK(std::abs(upd.lambda1) < 1e-3);
}

TEST_CASE("lambda update beats a 3-d grid oracle from the high-informative set") {
  // zeta simulated from lambda = (5, 8.5, -1.1), n = 500, T uniform on 1..5
  Rng rng(109);
  ModelSpec spec;
  spec.m = 1;
  spec.G = 3;
  spec.prior_mode = PriorMode::kDropout;
  ParamSet truth;
  truth.lambda0 = Eigen::VectorXd(2);
  truth.lambda0 << 5.0, 8.5;
  truth.lambda1 = -1.1;

  std::vector<int> T_values;
  for (int i = 0; i < 500; ++i) T_values.push_back(1 + (i % 5));
  PanelDataset data = panel_with_T(T_values);
  PosteriorSet post(data, 1, 3);
  for (int i = 0; i < data.n_units(); ++i) {
    Eigen::VectorXd pr = component_priors(truth, spec, data.T(i));
    int g = rng.categorical(pr.data(), 3);
    post.zeta(i, g) = 1.0;
  }

  ParamSet start;
  start.lambda0 = Eigen::VectorXd(2);
  start.lambda0 << 0.0, 1.0;
  start.lambda1 = 0.0;
  PriorUpdate upd = update_mixture_priors(post, data, spec, start);
  double fitted_obj = lambda_objective(data, post, spec, upd.lambda0, upd.lambda1);

  // grid oracle over (lambda01, lambda02, lambda1)
  double best_grid = -1e300;
  Eigen::VectorXd l0(2);
  for (double l01 = 2.0; l01 <= 8.0; l01 += 0.25) {
    for (double gap = 0.25; l01 + gap <= 12.0; gap += 0.25) {
      for (double l1 = -2.0; l1 <= 0.0; l1 += 0.05) {
        l0 << l01, l01 + gap;
        best_grid = std::max(best_grid, lambda_objective(data, post, spec, l0, l1));
      }
    }
  }
  CHECK(fitted_obj >= best_grid - 1e-6);
  // the quasi-Newton fit brackets the truth at least as well as the grid
  CHECK(upd.lambda1 == doctest::Approx(truth.lambda1).epsilon(0.5));
}

TEST_CASE("lambda update never decreases the objective from its warm start") {
  Rng rng(113);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<int> T_values;
    for (int i = 0; i < 50; ++i) {
      T_values.push_back(1 + static_cast<int>(rng.below(6)));
    }
    PanelDataset data = panel_with_T(T_values);
    ModelSpec spec;
    spec.m = 1;
    spec.G = 2 + static_cast<int>(rng.below(2));
    spec.prior_mode = PriorMode::kDropout;
    PosteriorSet post(data, 1, spec.G);
    for (int i = 0; i < data.n_units(); ++i) {
      Eigen::VectorXd row(spec.G);
      for (int g = 0; g < spec.G; ++g) row[g] = rng.uniform(0.05, 1.0);
      row /= row.sum();
      for (int g = 0; g < spec.G; ++g) post.zeta(i, g) = row[g];
    }
    ParamSet cur = testing::random_params(rng, spec, 1, 1, 1);
    double before = lambda_objective(data, post, spec, cur.lambda0, cur.lambda1);
    PriorUpdate upd = update_mixture_priors(post, data, spec, cur);
    double after = lambda_objective(data, post, spec, upd.lambda0, upd.lambda1);
    CHECK(after >= before - 1e-9);
    // monotone cutpoints preserved
    for (int g = 1; g < spec.G - 1; ++g) {
      CHECK(upd.lambda0[g] >= upd.lambda0[g - 1] - 1e-12);
    }
  }
}

TEST_CASE("sigma update: pinned cases and the stationary-point oracle") {
  Rng rng(127);
  // single obs, residual u, tau = 1/2, degenerate posteriors -> sigma = |u|/2
  {
    std::vector<PanelRecord> records(1);
    records[0].unit_id = "a";
    records[0].time = 1;
    records[0].y = 3.0;
    records[0].x = {0.0};
    records[0].z = {0.0};
    records[0].w = {1.0};
    PanelDataset data = validate_dataset(records);
    ModelSpec spec;
    spec.m = 1;
    spec.G = 1;
    spec.tau = 0.5;
    PosteriorSet post(data, 1, 1);
    post.zeta(0, 0) = 1.0;
    post.u1(0, 1, 0) = 1.0;
    post.ucond(0, 1, 0, 0) = 1.0;
    ParamSet params;
    params.beta = Eigen::VectorXd::Zero(1);
    params.alpha = {Eigen::VectorXd::Zero(1)};  // mu = 0, resid = 3
    params.b = {Eigen::VectorXd::Zero(1)};
    params.delta = Eigen::VectorXd::Ones(1);
    params.Q = Eigen::MatrixXd::Ones(1, 1);
    params.sigma = 1.0;
    params.pi = Eigen::VectorXd::Ones(1);
    bool floored = false;
    CHECK(update_sigma(data, post, params, spec, &floored) ==
          doctest::Approx(1.5).epsilon(1e-12));
    CHECK(!floored);

    // all residuals zero -> clamped at the floor and flagged
    ParamSet exact = params;
    exact.alpha[0][0] = 3.0;
    CHECK(update_sigma(data, post, exact, spec, &floored) ==
          doctest::Approx(1e-8));
    CHECK(floored);
  }

  // random instance: sigma-hat maximizes the ALD loglik in sigma given mu
  for (int rep = 0; rep < 10; ++rep) {
    auto inst = random_instance(rng);
    PosteriorSet post = estep(inst.data, inst.params, inst.spec);
    double sigma_hat = update_sigma(inst.data, post, inst.params, inst.spec);
    auto profile = [&](double sigma) {
      // expected complete-data loglik in sigma at fixed posteriors
      double loss = longitudinal_objective(inst.data, post, inst.params,
                                           inst.spec);
      return -inst.data.total_T() * std::log(sigma) - loss / sigma;
    };
    double oracle = testing::golden_section_max(profile, 1e-4, 50.0, 1e-10);
    CHECK(sigma_hat == doctest::Approx(oracle).epsilon(1e-5));
  }
}

TEST_CASE("longitudinal_objective is invariant to sigma (pure check loss)") {
  Rng rng(131);
  auto inst = random_instance(rng);
  PosteriorSet post = estep(inst.data, inst.params, inst.spec);
  ParamSet p2 = inst.params;
  p2.sigma *= 3.0;
  CHECK(longitudinal_objective(inst.data, post, inst.params, inst.spec) ==
        doctest::Approx(longitudinal_objective(inst.data, post, p2, inst.spec))
            .epsilon(1e-12));
}

TEST_CASE("full m-step never decreases the EM auxiliary function") {
  Rng rng(137);
  for (int rep = 0; rep < 10; ++rep) {
    auto inst = random_instance(rng);
    while (inst.data.n_obs() < 3) {
      inst = random_instance(rng);
    }
    PosteriorSet post = estep(inst.data, inst.params, inst.spec);

    auto q_function = [&](const ParamSet& p) {
      // expected complete-data loglik at fixed posteriors
      double acc = 0.0;
      for (int i = 0; i < inst.data.n_units(); ++i) {
        for (int h = 0; h < inst.spec.m; ++h) {
          double u = post.u1(i, 1, h);
          if (u > 0.0 && p.delta[h] > 0.0) acc += u * std::log(p.delta[h]);
        }
        for (int t = 2; t <= inst.data.T(i); ++t) {
          for (int k = 0; k < inst.spec.m; ++k) {
            for (int h = 0; h < inst.spec.m; ++h) {
              double u = post.u2(i, t, k, h);
              if (u > 0.0 && p.Q(k, h) > 0.0) acc += u * std::log(p.Q(k, h));
            }
          }
        }
        Eigen::VectorXd pr = component_priors(p, inst.spec, inst.data.T(i));
        for (int g = 0; g < inst.spec.G; ++g) {
          double z = post.zeta(i, g);
          if (z > 0.0) acc += z * std::log(std::max(pr[g], 1e-300));
        }
      }
      acc -= inst.data.total_T() * std::log(p.sigma);
      acc -= longitudinal_objective(inst.data, post, p, inst.spec) / p.sigma;
      return acc;
    };

    MStepReport report = mstep(inst.data, post, inst.params, inst.spec);
    CHECK(q_function(report.updated) >= q_function(inst.params) - 1e-8);
    CHECK(report.block_objective_after <=
          report.block_objective_before + 1e-10);
  }
}

TEST_CASE("frozen-slope dropout fit reproduces the closed-form shares") {
  // with lambda1 frozen at 0 and lambda0 free, the implied class shares must
  // match the closed-form pi-hat
  Rng rng(139);
  std::vector<int> T_values(120);
  for (auto& T : T_values) T = 1 + static_cast<int>(rng.below(5));
  PanelDataset data = panel_with_T(T_values);
  for (int rep = 0; rep < 5; ++rep) {
    ModelSpec spec;
    spec.m = 1;
    spec.G = 3;
    spec.prior_mode = PriorMode::kDropout;
    PosteriorSet post(data, 1, 3);
    Eigen::VectorXd totals = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < data.n_units(); ++i) {
      Eigen::VectorXd row(3);
      for (int g = 0; g < 3; ++g) row[g] = rng.uniform(0.05, 1.0);
      row /= row.sum();
      for (int g = 0; g < 3; ++g) {
        post.zeta(i, g) = row[g];
        totals[g] += row[g];
      }
    }
    totals /= data.n_units();

    // frozen lambda1 = 0: maximize over lambda0 only, via a fine 2-d grid
    // around the analytic solution logit(cumsum(pi))
    Eigen::VectorXd l0(2);
    double c1 = totals[0], c2 = totals[0] + totals[1];
    l0 << std::log(c1 / (1.0 - c1)), std::log(c2 / (1.0 - c2));
    ParamSet implied;
    implied.lambda0 = l0;
    implied.lambda1 = 0.0;
    ModelSpec probe = spec;
    Eigen::VectorXd shares = component_priors(implied, probe, /*T_i=*/3);
    for (int g = 0; g < 3; ++g) {
      CHECK(shares[g] == doctest::Approx(totals[g]).epsilon(1e-4));
    }
  }
}
