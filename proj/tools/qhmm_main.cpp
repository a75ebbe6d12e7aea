// qhmm: quantile regression with hidden-Markov random effects for
// longitudinal data. Subcommands: fit, select, bootstrap, simulate, study,
// evaluate. Flat key-value configs; every run is deterministic under a fixed
// seed. Exit codes: 0 ok, 1 input error, 2 numerical failure, 3 partial.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <set>

#include "qhmm/em.hpp"
#include "qhmm/errors.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/inference.hpp"
#include "qhmm/io.hpp"
#include "qhmm/metrics.hpp"
#include "qhmm/simulate.hpp"

namespace fs = std::filesystem;
using namespace qhmm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitPartial = 3;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::NonFiniteLikelihood:
    case ErrorCode::DegenerateFit:
    case ErrorCode::AllStartsFailed:
    case ErrorCode::NoConvergence:
    case ErrorCode::RankDeficientDesign:
    case ErrorCode::AllWeightsZero:
    case ErrorCode::NonPositiveScale:
    case ErrorCode::Internal:
      return kExitNumerical;
    default:
      return kExitInput;
  }
}

// ---------------------------------------------------------------------------
// config document with per-command key whitelists
// ---------------------------------------------------------------------------
class Config {
 public:
  Config(KvDocument doc, std::set<std::string> allowed) : allowed_(std::move(allowed)) {
    for (auto& [key, value] : doc) {
      if (!allowed_.count(key)) {
        fail(ErrorCode::ParseError, "unknown config key '" + key + "'");
      }
      map_[key] = value;
    }
  }

  bool has(const std::string& key) const { return map_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& dflt = "") const {
    auto it = map_.find(key);
    return it == map_.end() ? dflt : it->second;
  }
  double num(const std::string& key, double dflt) const {
    auto it = map_.find(key);
    if (it == map_.end()) return dflt;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      fail(ErrorCode::ParseError, "config key '" + key + "': bad number '" +
                                      it->second + "'");
    }
  }
  int integer(const std::string& key, int dflt) const {
    auto it = map_.find(key);
    if (it == map_.end()) return dflt;
    try {
      return std::stoi(it->second);
    } catch (const std::exception&) {
      fail(ErrorCode::ParseError, "config key '" + key + "': bad integer '" +
                                      it->second + "'");
    }
  }
  bool boolean(const std::string& key, bool dflt) const {
    auto it = map_.find(key);
    if (it == map_.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    fail(ErrorCode::ParseError, "config key '" + key + "': bad boolean '" +
                                    it->second + "'");
  }
  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = map_.find(key);
    if (it == map_.end() || it->second.empty()) return out;
    std::string cur;
    for (char c : it->second) {
      if (c == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

 private:
  std::map<std::string, std::string> map_;
  std::set<std::string> allowed_;
};

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 1;
  bool seed_given = false;
  int jobs = 1;
  std::string out_dir = ".";
  std::vector<double> taus;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  cmd->add_option("--seed", args.seed, "RNG seed")->each([&](const std::string&) {
    args.seed_given = true;
  });
  cmd->add_option("--jobs", args.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--tau", args.taus, "quantile level(s), repeatable");
}

Config load_config(const CommonArgs& args, std::set<std::string> allowed) {
  KvDocument doc;
  if (!args.config_path.empty()) doc = read_kv(args.config_path);
  return Config(std::move(doc), std::move(allowed));
}

const std::set<std::string> kDataKeys = {"x_cols", "z_cols", "w_cols"};
const std::set<std::string> kModelKeys = {"tau", "m", "G", "prior_mode",
                                          "eps_em", "max_iter"};
const std::set<std::string> kStartKeys = {"n_starts", "s_diag",
                                          "perturb_scale", "seed"};

std::set<std::string> merge_keys(std::initializer_list<std::set<std::string>> sets,
                                 std::initializer_list<std::string> extra = {}) {
  std::set<std::string> out;
  for (const auto& s : sets) out.insert(s.begin(), s.end());
  out.insert(extra.begin(), extra.end());
  return out;
}

PanelDataset load_panel(const std::string& path, const Config& cfg) {
  return read_panel_csv(path, cfg.list("x_cols"), cfg.list("z_cols"),
                        cfg.list("w_cols"));
}

ModelSpec spec_from(const Config& cfg, double tau) {
  ModelSpec spec;
  spec.tau = tau;
  spec.m = cfg.integer("m", 1);
  spec.G = cfg.integer("G", 1);
  spec.prior_mode = prior_mode_from_name(cfg.str("prior_mode", "constant"));
  spec.eps_em = cfg.num("eps_em", 1e-8);
  spec.max_iter = cfg.integer("max_iter", 500);
  spec.validate();
  return spec;
}

StartConfig start_from(const Config& cfg, const CommonArgs& args) {
  StartConfig start;
  start.n_random_starts = cfg.integer("n_starts", 30);
  start.s_diag = cfg.num("s_diag", 1.0);
  start.perturb_scale = cfg.num("perturb_scale", 0.5);
  start.rng_seed = args.seed_given
                       ? args.seed
                       : static_cast<std::uint64_t>(cfg.num("seed", 1));
  return start;
}

std::vector<double> resolve_taus(const CommonArgs& args, const Config& cfg,
                                 double dflt = 0.5) {
  if (!args.taus.empty()) return args.taus;
  if (cfg.has("tau")) return {cfg.num("tau", dflt)};
  return {dflt};
}

std::string tau_dir(const std::string& out_dir, double tau, bool multi) {
  if (!multi) return out_dir;
  std::string sub = out_dir + "/tau-" + format_double(tau);
  fs::create_directories(sub);
  return sub;
}

void write_fit_outputs(const std::string& dir, const PanelDataset& data,
                       const FitResult& res) {
  KvDocument doc = params_to_kv(res.params, res.spec, data);
  doc.emplace_back("fit.loglik", format_double(res.final_loglik));
  doc.emplace_back("fit.bic", format_double(res.bic));
  doc.emplace_back("fit.bic_n", format_double(res.bic_n));
  doc.emplace_back("fit.n_params", std::to_string(res.n_params));
  doc.emplace_back("fit.converged", res.converged ? "true" : "false");
  doc.emplace_back("fit.n_iter", std::to_string(res.n_iter));
  write_kv(dir + "/params.kv", doc);

  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t it = 0; it < res.loglik_trace.size(); ++it) {
      rows.push_back({std::to_string(it), format_double(res.loglik_trace[it])});
    }
    write_csv(dir + "/loglik_trace.csv", {"iter", "loglik"}, rows);
  }
  {
    // state posteriors and component posteriors in one long table
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < data.n_units(); ++i) {
      for (int t = 1; t <= data.T(i); ++t) {
        for (int h = 0; h < res.spec.m; ++h) {
          rows.push_back({"u_single", data.unit_id(i), std::to_string(t),
                          std::to_string(h + 1), "",
                          format_double(res.posterior.u1(i, t, h))});
        }
      }
      for (int g = 0; g < res.spec.G; ++g) {
        rows.push_back({"zeta", data.unit_id(i), "", "", std::to_string(g + 1),
                        format_double(res.posterior.zeta(i, g))});
      }
    }
    write_csv(dir + "/posteriors.csv",
              {"kind", "unit", "time", "state", "component", "value"}, rows);
  }
  {
    std::vector<int> cls = classify_components(res.posterior);
    auto local = decode_states(data, res.params, res.spec, DecodeMode::kLocal);
    auto viterbi =
        decode_states(data, res.params, res.spec, DecodeMode::kViterbi);
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < data.n_units(); ++i) {
      for (int t = 1; t <= data.T(i); ++t) {
        rows.push_back({data.unit_id(i), std::to_string(t),
                        std::to_string(cls[i] + 1),
                        std::to_string(local[i][t - 1] + 1),
                        std::to_string(viterbi[i][t - 1] + 1)});
      }
    }
    write_csv(dir + "/classification.csv",
              {"unit", "time", "component", "state_local", "state_viterbi"},
              rows);
  }
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

int cmd_fit(const std::string& data_path, const CommonArgs& args) {
  Config cfg = load_config(args, merge_keys({kDataKeys, kModelKeys, kStartKeys},
                                            {"jobs"}));
  PanelDataset data = load_panel(data_path, cfg);
  std::vector<double> taus = resolve_taus(args, cfg);
  fs::create_directories(args.out_dir);
  for (double tau : taus) {
    ModelSpec spec = spec_from(cfg, tau);
    StartConfig start = start_from(cfg, args);
    FitResult res = multi_start_fit(data, spec, start, args.jobs);
    write_fit_outputs(tau_dir(args.out_dir, tau, taus.size() > 1), data, res);
  }
  return kExitOk;
}

int cmd_select(const std::string& data_path, const CommonArgs& args) {
  Config cfg = load_config(
      args, merge_keys({kDataKeys, kModelKeys, kStartKeys},
                       {"m_min", "m_max", "G_min", "G_max", "m_values",
                        "G_values", "jobs"}));
  PanelDataset data = load_panel(data_path, cfg);
  std::vector<double> taus = resolve_taus(args, cfg);
  fs::create_directories(args.out_dir);

  auto grid_values = [&](const std::string& list_key, const std::string& lo_key,
                         const std::string& hi_key) {
    std::vector<int> vals;
    for (const auto& s : cfg.list(list_key)) vals.push_back(std::stoi(s));
    if (vals.empty()) {
      int lo = cfg.integer(lo_key, 1), hi = cfg.integer(hi_key, 1);
      for (int v = lo; v <= hi; ++v) vals.push_back(v);
    }
    return vals;
  };
  std::vector<int> m_values = grid_values("m_values", "m_min", "m_max");
  std::vector<int> G_values = grid_values("G_values", "G_min", "G_max");
  PriorMode mode = prior_mode_from_name(cfg.str("prior_mode", "constant"));

  bool any_failed = false;
  for (double tau : taus) {
    StartConfig start = start_from(cfg, args);
    SelectionResult sel = select_model(
        data, m_values, G_values, tau, mode, start, args.jobs, {},
        cfg.num("eps_em", 1e-8), cfg.integer("max_iter", 500));
    std::string dir = tau_dir(args.out_dir, tau, taus.size() > 1);
    std::vector<std::vector<std::string>> rows;
    for (const auto& cell : sel.grid) {
      if (!cell.available) {
        any_failed = true;
        rows.push_back({std::to_string(cell.m), std::to_string(cell.G), "", "",
                        "", "", "false", "0"});
        continue;
      }
      const FitResult& r = *cell.result;
      rows.push_back({std::to_string(cell.m), std::to_string(cell.G),
                      format_double(r.final_loglik), std::to_string(r.n_params),
                      format_double(r.bic), format_double(r.bic_n),
                      r.converged ? "true" : "false", cell.chosen ? "1" : "0"});
    }
    write_csv(dir + "/grid.csv",
              {"m", "G", "loglik", "n_params", "bic", "bic_n", "converged",
               "chosen"},
              rows);
    if (sel.best_index < 0) {
      fail(ErrorCode::AllStartsFailed, "no grid cell produced a fit");
    }
    write_fit_outputs(dir, data, *sel.grid[sel.best_index].result);
  }
  return any_failed ? kExitPartial : kExitOk;
}

int cmd_bootstrap(const std::string& data_path, const std::string& params_path,
                  const CommonArgs& args) {
  Config cfg = load_config(args, merge_keys({kDataKeys, kModelKeys, kStartKeys},
                                            {"B", "level", "warm_start",
                                             "jobs"}));
  PanelDataset data = load_panel(data_path, cfg);
  auto [params, spec] = params_from_kv(read_kv(params_path), data);
  spec.eps_em = cfg.num("eps_em", 1e-8);
  spec.max_iter = cfg.integer("max_iter", 500);
  if (!args.taus.empty()) spec.tau = args.taus.front();

  // point refit to recover posteriors/loglik at the supplied estimate
  FitResult point = fit(data, spec, params);

  BootstrapOptions opts;
  opts.B = cfg.integer("B", 100);
  opts.level = cfg.num("level", 0.95);
  opts.rng_seed = args.seed_given
                      ? args.seed
                      : static_cast<std::uint64_t>(cfg.num("seed", 1));
  opts.warm_start = cfg.boolean("warm_start", true);
  opts.multi_start = start_from(cfg, args);
  opts.jobs = args.jobs;
  BootstrapResult boot = block_bootstrap(data, spec, point, opts);

  fs::create_directories(args.out_dir);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t j = 0; j < boot.param_names.size(); ++j) {
    rows.push_back({boot.param_names[j], format_double(boot.estimate[j]),
                    format_double(boot.ci_lower[j]),
                    format_double(boot.ci_upper[j]),
                    std::to_string(boot.B_effective)});
  }
  write_csv(args.out_dir + "/ci.csv",
            {"parameter", "estimate", "lower", "upper", "B_effective"}, rows);
  return boot.B_effective < boot.B ? kExitPartial : kExitOk;
}

ScenarioConfig scenario_from(const Config& cfg, const CommonArgs& args) {
  ScenarioConfig sc;
  std::string name = cfg.str("scenario", "two");
  if (name == "one") {
    sc.scenario = Scenario::kOne;
  } else if (name == "two") {
    sc.scenario = Scenario::kTwo;
  } else {
    fail(ErrorCode::ParseError, "scenario must be 'one' or 'two'");
  }
  sc.n = cfg.integer("n", 100);
  sc.T = cfg.integer("T", 5);
  sc.error_dist = error_dist_from_name(cfg.str("error_dist", "normal"));
  std::string reff = cfg.str("reffect_dist", "normal");
  if (reff == "normal") {
    sc.reffect_dist = ReffectDist::kNormal01;
  } else if (reff == "t3") {
    sc.reffect_dist = ReffectDist::kStudentT3;
  } else {
    fail(ErrorCode::ParseError, "reffect_dist must be 'normal' or 't3'");
  }
  std::string lset = cfg.str("lambda_set", "high");
  if (lset == "low") {
    sc.lambda_set = LambdaSet::kLow;
  } else if (lset == "high") {
    sc.lambda_set = LambdaSet::kHigh;
  } else {
    fail(ErrorCode::ParseError, "lambda_set must be 'low' or 'high'");
  }
  std::string law = cfg.str("dropout_law", "uniform_2_to_T");
  if (law == "uniform_1_to_T") {
    sc.dropout_law = DropoutLaw::kUniform1ToT;
  } else if (law == "uniform_2_to_T") {
    sc.dropout_law = DropoutLaw::kUniform2ToT;
  } else {
    fail(ErrorCode::ParseError,
         "dropout_law must be uniform_1_to_T or uniform_2_to_T");
  }
  sc.x1_spread_is_sd = cfg.boolean("x1_spread_is_sd", false);
  sc.zero_errors = cfg.boolean("zero_errors", false);
  sc.rng_seed = args.seed_given
                    ? args.seed
                    : static_cast<std::uint64_t>(cfg.num("seed", 1));
  return sc;
}

const std::set<std::string> kScenarioKeys = {
    "scenario", "n", "T", "error_dist", "reffect_dist", "lambda_set",
    "dropout_law", "x1_spread_is_sd", "zero_errors", "seed"};

int cmd_simulate(const CommonArgs& args) {
  Config cfg = load_config(args, merge_keys({kScenarioKeys}));
  ScenarioConfig sc = scenario_from(cfg, args);
  SimulatedPanel sim = sc.scenario == Scenario::kOne ? generate_scenario1(sc)
                                                     : generate_scenario2(sc);
  fs::create_directories(args.out_dir);
  write_panel_csv(args.out_dir + "/data.csv", sim.data);
  {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < sim.data.n_units(); ++i) {
      for (int t = 1; t <= sim.data.T(i); ++t) {
        std::string cls = sim.truth.component[i] >= 0
                              ? std::to_string(sim.truth.component[i] + 1)
                              : format_double(sim.truth.reffect[i]);
        rows.push_back({sim.data.unit_id(i), std::to_string(t), cls,
                        std::to_string(sim.truth.states[i][t - 1] + 1)});
      }
    }
    write_csv(args.out_dir + "/truth.csv", {"unit", "time", "class", "state"},
              rows);
  }
  {
    // ready-to-fit column mapping for the generated file
    KvDocument doc;
    if (sc.scenario == Scenario::kTwo) {
      doc.emplace_back("x_cols", "x2");
      doc.emplace_back("z_cols", "x1");
      doc.emplace_back("w_cols", "const");
      doc.emplace_back("m", "2");
      doc.emplace_back("G", "3");
      doc.emplace_back("prior_mode", "dropout");
    } else {
      doc.emplace_back("x_cols", "x1,x2");
      doc.emplace_back("z_cols", "x1");
      doc.emplace_back("w_cols", "const");
      doc.emplace_back("m", "2");
      doc.emplace_back("G", "1");
      doc.emplace_back("prior_mode", "constant");
    }
    write_kv(args.out_dir + "/fit_config.kv", doc);
  }
  return kExitOk;
}

int cmd_study(const CommonArgs& args) {
  Config cfg = load_config(
      args, merge_keys({kScenarioKeys, kStartKeys},
                       {"B", "tau", "eps_em", "max_iter", "jobs"}));
  ScenarioConfig sc = scenario_from(cfg, args);
  StudyOptions opts;
  opts.B = cfg.integer("B", 50);
  opts.taus = resolve_taus(args, cfg);
  opts.start = start_from(cfg, args);
  opts.eps_em = cfg.num("eps_em", 1e-8);
  opts.max_iter = cfg.integer("max_iter", 500);
  opts.jobs = args.jobs;

  ReplicateStudy study = run_study(sc, opts);

  fs::create_directories(args.out_dir);
  std::vector<std::vector<std::string>> rows;
  for (const auto& res : study.results) {
    for (const auto& cell : res.cells) {
      rows.push_back({format_double(res.tau), res.model,
                      error_dist_name(sc.error_dist), cell.parameter,
                      format_double(cell.truth_raw),
                      format_double(cell.truth_adjusted),
                      format_double(cell.raw.bias), format_double(cell.raw.rmse),
                      format_double(cell.adjusted.bias),
                      format_double(cell.adjusted.rmse)});
    }
  }
  write_csv(args.out_dir + "/study_summary.csv",
            {"tau", "model", "error_dist", "parameter", "truth_raw",
             "truth_adjusted", "bias", "rmse", "bias_adjusted", "rmse_adjusted"},
            rows);
  std::vector<std::vector<std::string>> ari_rows;
  for (const auto& res : study.results) {
    for (std::size_t rep = 0; rep < res.ari.size(); ++rep) {
      ari_rows.push_back({std::to_string(rep), format_double(res.tau),
                          res.model, format_double(res.ari[rep])});
    }
  }
  write_csv(args.out_dir + "/ari.csv", {"replicate", "tau", "model", "ari"},
            ari_rows);
  return study.failed > 0 ? kExitPartial : kExitOk;
}

int cmd_evaluate(const CommonArgs& args) {
  Config cfg = load_config(
      args, {"mode", "labels_a", "labels_b", "label_col", "estimates", "truth"});
  std::string mode = cfg.str("mode", "ari");
  fs::create_directories(args.out_dir);
  if (mode == "ari") {
    std::string col = cfg.str("label_col", "component");
    auto load_labels = [&](const std::string& path) {
      CsvTable t = read_csv(path);
      int unit_col = t.column("unit");
      int label_col = t.column(col);
      if (unit_col < 0 || label_col < 0) {
        fail(ErrorCode::ParseError,
             path + ": need columns 'unit' and '" + col + "'");
      }
      // one label per unit (first row wins)
      std::vector<int> labels;
      std::string last_unit;
      for (const auto& row : t.rows) {
        if (row[unit_col] != last_unit) {
          labels.push_back(std::stoi(row[label_col]));
          last_unit = row[unit_col];
        }
      }
      return labels;
    };
    std::vector<int> a = load_labels(cfg.str("labels_a"));
    std::vector<int> b = load_labels(cfg.str("labels_b"));
    double ari = adjusted_rand(a, b);
    std::cout << "ari = " << format_double(ari) << "\n";
    write_kv(args.out_dir + "/ari.kv", {{"ari", format_double(ari)}});
    return kExitOk;
  }
  if (mode == "bias") {
    // estimates: CSV with columns param,value (one row per replicate x param)
    CsvTable est = read_csv(cfg.str("estimates"));
    int pcol = est.column("param"), vcol = est.column("value");
    if (pcol < 0 || vcol < 0) {
      fail(ErrorCode::ParseError, "estimates CSV needs columns param,value");
    }
    KvDocument truth_doc = read_kv(cfg.str("truth"));
    std::map<std::string, double> truth;
    for (const auto& [key, value] : truth_doc) truth[key] = std::stod(value);
    std::map<std::string, std::vector<double>> groups;
    for (const auto& row : est.rows) {
      groups[row[pcol]].push_back(std::stod(row[vcol]));
    }
    std::vector<std::vector<std::string>> rows;
    for (const auto& [param, values] : groups) {
      auto it = truth.find(param);
      if (it == truth.end()) {
        fail(ErrorCode::ParseError, "no truth value for parameter " + param);
      }
      BiasRmse br = bias_rmse(values, it->second);
      rows.push_back({param, format_double(it->second), format_double(br.bias),
                      format_double(br.rmse)});
    }
    write_csv(args.out_dir + "/bias_rmse.csv",
              {"param", "truth", "bias", "rmse"}, rows);
    return kExitOk;
  }
  fail(ErrorCode::ParseError, "evaluate mode must be 'ari' or 'bias'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantile regression hidden Markov mixtures for longitudinal data"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string data_path, params_path;

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one model to a panel CSV");
  fit_cmd->add_option("data", data_path, "panel CSV")->required();
  add_common(fit_cmd, args);

  CLI::App* select_cmd =
      app.add_subcommand("select", "BIC model selection over an (m, G) grid");
  select_cmd->add_option("data", data_path, "panel CSV")->required();
  add_common(select_cmd, args);

  CLI::App* boot_cmd =
      app.add_subcommand("bootstrap", "block-bootstrap confidence intervals");
  boot_cmd->add_option("data", data_path, "panel CSV")->required();
  boot_cmd->add_option("params", params_path, "fitted params.kv")->required();
  add_common(boot_cmd, args);

  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate scenario data");
  add_common(sim_cmd, args);

  CLI::App* study_cmd =
      app.add_subcommand("study", "replicate bias/RMSE + ARI study");
  add_common(study_cmd, args);

  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "ARI / bias-RMSE from files");
  add_common(eval_cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return cmd_fit(data_path, args);
    if (select_cmd->parsed()) return cmd_select(data_path, args);
    if (boot_cmd->parsed()) return cmd_bootstrap(data_path, params_path, args);
    if (sim_cmd->parsed()) return cmd_simulate(args);
    if (study_cmd->parsed()) return cmd_study(args);
    if (eval_cmd->parsed()) return cmd_evaluate(args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}
