#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "rankcf/baselines.hpp"
#include "rankcf/dataset.hpp"
#include "rankcf/errors.hpp"
#include "rankcf/estimator.hpp"
#include "rankcf/format.hpp"
#include "rankcf/harness.hpp"
#include "rankcf/kernels.hpp"
#include "rankcf/parallel.hpp"
#include "rankcf/propensity.hpp"
#include "rankcf/rank.hpp"
#include "rankcf/simulator.hpp"

namespace rankcf {
namespace {

using nlohmann::json;

struct SchemaFlags {
  std::string treatment = "x";
  std::string outcome = "y";
  std::string covariates;
  std::string split = "split";
  std::string mode = "binary";

  CsvSchema schema() const {
    CsvSchema s;
    s.treatment = treatment;
    s.outcome = outcome;
    std::stringstream in(covariates);
    for (std::string name; std::getline(in, name, ',');) {
      if (!name.empty()) s.covariates.push_back(name);
    }
    s.split = split;
    s.mode = parse_treatment_mode(mode);
    return s;
  }
};

struct PropensityFlags {
  std::string propensity = "logistic";
  double l2 = 1e-4;
  double clip = kDefaultClip;
};

struct Options {
  bool json_errors = false;
  unsigned threads = 0;

  // simulate
  SimConfig sim;
  std::optional<double> rank_target;
  std::size_t calibration_n = 100000;
  std::string out;

  // estimate / baseline
  std::string dataset;
  std::string queries;
  SchemaFlags schema;
  PropensityFlags prop;
  std::string kernel = "gaussian";
  double bandwidth = 1.0;
  double x_bandwidth = 0.0;
  bool standardize = false;
  bool weighted = false;
  std::string method;
  double tau_step = 0.05;
  int quantile_iterations = 20000;

  // rank-check
  std::string input;
  std::string x_col;
  std::string y_col;

  // run / sweep
  std::string plan;
  std::string axis;
  std::string values;
};

void add_schema_flags(CLI::App* app, SchemaFlags& s) {
  app->add_option("--treatment-col", s.treatment, "Treatment column")->capture_default_str();
  app->add_option("--outcome-col", s.outcome, "Outcome column")->capture_default_str();
  app->add_option("--covariates", s.covariates,
                  "Comma-separated covariate columns (default: all remaining columns)");
  app->add_option("--split-col", s.split,
                  "Split column (train|val|test); missing column means every row is train")
      ->capture_default_str();
  app->add_option("--mode", s.mode, "Treatment mode")
      ->check(CLI::IsMember({"binary", "continuous"}))
      ->capture_default_str();
}

void add_propensity_flags(CLI::App* app, PropensityFlags& p) {
  app->add_option("--propensity", p.propensity,
                  "logistic | oracle | scaled:c0,c1 (oracle and scaled need a simulated source)")
      ->capture_default_str();
  app->add_option("--l2", p.l2, "Logistic L2 penalty")->capture_default_str();
  app->add_option("--clip", p.clip, "Propensity clip floor in (0, 0.5)")->capture_default_str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << text;
  if (!f) throw IoError("failed writing '" + path + "'");
}

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_text(path, text);
  }
}

// Loads the dataset and queries, standardizing both with train statistics
// when asked.
struct Inputs {
  ObservationalDataset pool;
  std::vector<Evidence> queries;
};

Inputs load_inputs(const Options& o) {
  const CsvSchema schema = o.schema.schema();
  LoadedData loaded = load_csv_full(o.dataset, schema);
  ObservationalDataset pool = loaded.dataset.subset(Split::train);
  std::vector<Evidence> queries = load_queries_csv(o.queries, loaded.covariate_names);
  if (o.standardize) {
    const std::size_t m = pool.dim();
    std::vector<double> mean(m, 0.0), scale(m, 0.0);
    for (std::size_t k = 0; k < pool.size(); ++k) {
      for (std::size_t j = 0; j < m; ++j) mean[j] += pool.covariates(k)[j];
    }
    for (double& v : mean) v /= static_cast<double>(pool.size());
    for (std::size_t k = 0; k < pool.size(); ++k) {
      for (std::size_t j = 0; j < m; ++j) {
        const double d = pool.covariates(k)[j] - mean[j];
        scale[j] += d * d;
      }
    }
    for (double& v : scale) {
      v = std::sqrt(v / static_cast<double>(pool.size()));
      if (!(v > 0.0)) v = 1.0;
    }
    pool = pool.standardized(mean, scale);
    for (auto& q : queries) {
      for (std::size_t j = 0; j < m && j < q.z.size(); ++j) q.z[j] = (q.z[j] - mean[j]) / scale[j];
    }
  }
  return {std::move(pool), std::move(queries)};
}

PropensityFn csv_propensity(const Options& o, const ObservationalDataset& pool) {
  const PropensitySpec spec = parse_propensity_spec(o.prop.propensity);
  if (spec.kind != PropensitySpec::Kind::logistic) {
    throw ValidationError("--propensity " + o.prop.propensity +
                          " needs a simulated source; CSV inputs use logistic");
  }
  LogisticOptions opt;
  opt.l2 = o.prop.l2;
  opt.clip = o.prop.clip;
  if (!(opt.clip > 0.0 && opt.clip < 0.5)) throw ValidationError("--clip must lie in (0, 0.5)");
  return as_propensity_fn(fit_logistic(pool, opt).model);
}

int cmd_simulate(const Options& o, std::ostream& out) {
  SimConfig config = o.sim;
  json calibration = nullptr;
  if (o.rank_target) {
    const BetaCalibration cal = calibrate_beta(config, *o.rank_target, o.calibration_n);
    config.beta = cal.beta;
    config.violation_draw = cal.violation_draw;
    calibration = json{{"target_tau", *o.rank_target},
                       {"beta", cal.beta},
                       {"achieved_tau", cal.achieved_tau},
                       {"violation_draw", cal.violation_draw},
                       {"bracketed", cal.bracketed}};
  }
  const SimResult sim = simulate(config);
  std::filesystem::create_directories(o.out);
  const std::filesystem::path dir(o.out);
  const auto names = default_covariate_names(config.m);
  write_csv((dir / "dataset.csv").string(), sim.dataset, names);
  std::string truth = "y0,y1\n";
  for (std::size_t k = 0; k < sim.truth.size(); ++k) {
    truth += format_double(sim.truth.y0[k]) + "," + format_double(sim.truth.y1[k]) + "\n";
  }
  write_text((dir / "truth.csv").string(), truth);
  json manifest{{"config", to_json(config)},
                {"seed", config.seed},
                {"w_x", sim.w_x},
                {"w_y", sim.w_y},
                {"covariance_regularized", sim.covariance_regularized}};
  if (config.beta > 0.0) manifest["w_y1"] = sim.w_y1;
  if (!calibration.is_null()) manifest["beta_calibration"] = calibration;
  write_text((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  out << "wrote " << (dir / "dataset.csv").string() << ", truth.csv, manifest.json\n";
  return 0;
}

int cmd_estimate(const Options& o, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(o);
  const KernelSpec kernel(parse_kernel_family(o.kernel), o.bandwidth);
  std::vector<CounterfactualEstimate> results(in.queries.size());
  std::vector<std::string> failures(in.queries.size());

  if (in.pool.mode() == TreatmentMode::continuous) {
    if (o.weighted) throw ValidationError("--weighted applies to binary treatments only");
    const KernelSpec kernel_x(kernel.family(), o.x_bandwidth);
    parallel_for(in.queries.size(), o.threads, [&](std::size_t i) {
      try {
        results[i] =
            minimize_profile(build_profile_continuous(in.pool, in.queries[i], kernel, kernel_x));
      } catch (const CoverageError& e) {
        failures[i] = e.what();
      }
    });
  } else {
    const PropensityFn prop = csv_propensity(o, in.pool);
    const CounterfactualEstimator estimator(in.pool, kernel, prop);
    parallel_for(in.queries.size(), o.threads, [&](std::size_t i) {
      try {
        const RowWeightFn w =
            o.weighted ? kernel_ratio_weight(in.pool, kernel, in.queries[i].z) : RowWeightFn{};
        results[i] = estimator.estimate(in.queries[i], w);
      } catch (const CoverageError& e) {
        failures[i] = e.what();
      }
    });
  }

  std::string csv = "row,y_hat,bounded,coverage_ok,n_effective,loss_at_min\n";
  std::size_t failed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    csv += std::to_string(i + 1) + ",";
    if (!failures[i].empty()) {
      ++failed;
      csv += ",0,0,,\n";
      continue;
    }
    const auto& r = results[i];
    csv += format_double(r.y_hat) + "," + (r.bounded ? "1" : "0") + "," +
           (r.coverage_ok ? "1" : "0") + "," + format_double(r.n_effective) + "," +
           format_double(r.loss_at_min) + "\n";
  }
  emit(o.out, csv, out);
  if (failed > 0) {
    throw CoverageError(std::to_string(failed) + " of " + std::to_string(results.size()) +
                        " queries had no kernel coverage (rows flagged coverage_ok=0)");
  }
  (void)err;
  return 0;
}

int cmd_baseline(const Options& o, std::ostream& out) {
  const Inputs in = load_inputs(o);
  const Method method = parse_method(o.method);
  const TauGrid grid = TauGrid::uniform(o.tau_step);
  QuantileFitOptions qopt;
  qopt.iterations = o.quantile_iterations;
  std::vector<double> y_hat(in.queries.size());
  std::vector<std::size_t> level(in.queries.size());
  if (method == Method::bilevel) {
    const BilevelQuantileModel model(in.pool, grid, qopt, o.threads);
    for (std::size_t i = 0; i < in.queries.size(); ++i) {
      y_hat[i] = model.estimate(in.queries[i]);
      level[i] = model.selected_level(in.queries[i]);
    }
  } else if (method == Method::fourstep) {
    const PropensityFn prop = csv_propensity(o, in.pool);
    const FourStepQuantileModel model(in.pool, grid, prop, qopt, o.threads);
    for (std::size_t i = 0; i < in.queries.size(); ++i) {
      y_hat[i] = model.estimate(in.queries[i]);
      level[i] = model.selected_level(in.queries[i]);
    }
  } else {
    throw ValidationError("--method must be bilevel or fourstep");
  }
  std::string csv = "row,y_hat,tau_star\n";
  for (std::size_t i = 0; i < y_hat.size(); ++i) {
    csv += std::to_string(i + 1) + "," + format_double(y_hat[i]) + "," +
           format_double(grid.levels()[level[i]]) + "\n";
  }
  emit(o.out, csv, out);
  return 0;
}

int cmd_rank_check(const Options& o, std::ostream& out) {
  const CsvTable table = read_csv_table(o.input);
  auto pick = [&](const std::string& name, std::size_t fallback) {
    if (name.empty()) {
      if (table.header.size() <= fallback) {
        throw SchemaError("rank-check needs a CSV with at least two columns");
      }
      return fallback;
    }
    const auto col = table.column(name);
    if (!col) throw SchemaError("column '" + name + "' not found");
    return *col;
  };
  const std::size_t cx = pick(o.x_col, 0);
  const std::size_t cy = pick(o.y_col, 1);
  std::vector<double> xs, ys;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    xs.push_back(parse_cell(table, r, cx));
    ys.push_back(parse_cell(table, r, cy));
  }
  const RankReport rep = xs.size() > 2000 ? kendall_fast(xs, ys) : kendall(xs, ys);
  const json j{{"n", rep.n},
               {"rho", rep.rho},
               {"rho_tilde", rep.rho_tilde},
               {"n_concordant", rep.n_concordant},
               {"n_discordant", rep.n_discordant},
               {"ties_x", rep.ties_x},
               {"ties_y", rep.ties_y}};
  out << j.dump() << "\n";
  return 0;
}

// Flags given on the command line override the plan file.
struct PlanOverrides {
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods;
  std::vector<std::string> kernels;
  std::vector<double> bandwidths;
  std::optional<std::string> propensity;
  std::optional<double> l2;
  std::optional<double> clip;
  std::optional<double> tau_step;
  std::optional<int> quantile_iterations;
  std::optional<double> rank_target;
  std::optional<std::size_t> m, n;
  std::optional<double> alpha, rho, beta;
  bool standardize = false;
  bool predict_both_arms = false;
};

void add_plan_flags(CLI::App* app, PlanOverrides& p) {
  app->add_option("--seed", p.seed, "Run this single seed instead of the plan's seed list");
  app->add_option("--method", p.methods, "Methods (repeatable): ours, ours-weighted, bilevel, fourstep");
  app->add_option("--kernel", p.kernels, "Kernel grid (repeatable): gaussian, epanechnikov");
  app->add_option("--bandwidth", p.bandwidths, "Bandwidth grid (repeatable)");
  app->add_option("--propensity", p.propensity, "logistic | oracle | scaled:c0,c1");
  app->add_option("--l2", p.l2, "Logistic L2 penalty");
  app->add_option("--clip", p.clip, "Propensity clip floor");
  app->add_option("--tau-step", p.tau_step, "Quantile grid step for the baselines");
  app->add_option("--quantile-iterations", p.quantile_iterations,
                  "Subgradient iterations per quantile fit");
  app->add_option("--rank-target", p.rank_target, "Calibrate beta to this pooled Kendall tau");
  app->add_option("--m", p.m, "Simulator covariate dimension");
  app->add_option("--n", p.n, "Simulator sample size");
  app->add_option("--alpha", p.alpha, "Simulator heterogeneity alpha");
  app->add_option("--rho", p.rho, "Simulator covariate correlation");
  app->add_option("--beta", p.beta, "Simulator rank-violation scale");
  app->add_flag("--standardize", p.standardize, "Standardize covariates with train statistics");
  app->add_flag("--predict-both-arms", p.predict_both_arms,
                "Baselines also predict the factual arm instead of using the observed y");
}

ExperimentPlan resolve_plan(const Options& o, const PlanOverrides& p) {
  ExperimentPlan plan = parse_plan(read_json(o.plan));
  if (p.seed) plan.seeds = {*p.seed};
  if (!p.methods.empty()) {
    plan.methods.clear();
    for (const auto& m : p.methods) plan.methods.push_back(parse_method(m));
  }
  if (!p.kernels.empty()) {
    plan.kernels.clear();
    for (const auto& k : p.kernels) plan.kernels.push_back(parse_kernel_family(k));
  }
  if (!p.bandwidths.empty()) plan.bandwidths = p.bandwidths;
  if (p.propensity) plan.propensity = parse_propensity_spec(*p.propensity);
  if (p.l2) plan.l2 = *p.l2;
  if (p.clip) plan.clip = *p.clip;
  if (p.tau_step) plan.tau_step = *p.tau_step;
  if (p.quantile_iterations) plan.quantile_iterations = *p.quantile_iterations;
  if (p.rank_target) plan.rank_target = *p.rank_target;
  if (p.m) plan.sim.m = *p.m;
  if (p.n) plan.sim.n = *p.n;
  if (p.alpha) plan.sim.alpha = *p.alpha;
  if (p.rho) plan.sim.rho = *p.rho;
  if (p.beta) plan.sim.beta = *p.beta;
  if (p.standardize) plan.standardize = true;
  if (p.predict_both_arms) plan.predict_both_arms = true;
  if (o.threads != 0) plan.threads = o.threads;
  plan.validate();
  return plan;
}

void write_results(const std::string& out_dir, const std::string& csv, const json& manifest,
                   std::ostream& out) {
  if (out_dir.empty()) {
    out << csv;
    return;
  }
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_text((dir / "results.csv").string(), csv);
  write_text((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

void log_cells(const std::vector<ResultRow>& rows, std::ostream& err) {
  for (const auto& r : rows) {
    err << "seed " << r.seed << " " << r.method << " " << r.sample << ": " << r.status;
    if (!std::isnan(r.sqrt_pehe)) err << " sqrt_pehe=" << format_double(r.sqrt_pehe);
    if (!r.message.empty()) err << " (" << r.message << ")";
    err << "\n";
  }
}

int cmd_run(const Options& o, const PlanOverrides& p, std::ostream& out, std::ostream& err) {
  const ExperimentPlan plan = resolve_plan(o, p);
  const ExperimentResults results = run_experiment(plan);
  log_cells(results.rows, err);
  write_results(o.out, results_csv(results), results.manifest, out);
  return 0;
}

int cmd_sweep(const Options& o, const PlanOverrides& p, std::ostream& out, std::ostream& err) {
  const ExperimentPlan plan = resolve_plan(o, p);
  std::vector<std::string> values;
  std::stringstream in(o.values);
  for (std::string v; std::getline(in, v, ',');) {
    if (!v.empty()) values.push_back(v);
  }
  const SweepResults results = sweep(parse_sweep_axis(o.axis), values, plan);
  json manifest{{"axis", std::string(to_string(results.axis))}, {"values", values}};
  json runs = json::array();
  for (std::size_t i = 0; i < results.runs.size(); ++i) {
    err << to_string(results.axis) << "=" << values[i] << "\n";
    log_cells(results.runs[i].rows, err);
    runs.push_back(results.runs[i].manifest);
  }
  manifest["runs"] = runs;
  write_results(o.out, results.csv(), manifest, out);
  return 0;
}

struct Cli {
  CLI::App app{"Counterfactual outcome estimation under rank preservation.\n"
               "Option precedence: command-line flag > plan file > built-in default.",
               "rankcf"};
  Options o;
  PlanOverrides run_overrides;
  PlanOverrides sweep_overrides;
  CLI::App* simulate = nullptr;
  CLI::App* estimate = nullptr;
  CLI::App* baseline = nullptr;
  CLI::App* rank_check = nullptr;
  CLI::App* run = nullptr;
  CLI::App* sweep_cmd = nullptr;

  Cli() {
    app.require_subcommand(1);
    app.add_flag("--json", o.json_errors, "Print errors as JSON on stderr");

    simulate = app.add_subcommand("simulate", "Generate a Sim-m dataset with ground truth");
    simulate->add_option("--m", o.sim.m, "Covariate dimension")->capture_default_str();
    simulate->add_option("--n", o.sim.n, "Sample size")->capture_default_str();
    simulate->add_option("--alpha", o.sim.alpha, "Heterogeneity alpha")->capture_default_str();
    simulate->add_option("--rho", o.sim.rho, "Covariate correlation")->capture_default_str();
    simulate->add_option("--beta", o.sim.beta, "Rank-violation scale")->capture_default_str();
    simulate->add_option("--rank-target", o.rank_target,
                         "Calibrate beta so the pooled Kendall tau of (Y0, Y1) hits this value");
    simulate->add_option("--calibration-n", o.calibration_n, "Sample size used for calibration")
        ->capture_default_str();
    simulate->add_option("--seed", o.sim.seed, "Random seed")->capture_default_str();
    simulate->add_option("--out", o.out, "Output directory")->required();
    simulate->add_flag("--json", o.json_errors, "Print errors as JSON on stderr");

    estimate = app.add_subcommand("estimate", "Estimate counterfactual outcomes for queries");
    estimate->add_option("--dataset", o.dataset, "Dataset CSV (train rows form the pool)")
        ->required();
    estimate->add_option("--queries", o.queries, "Queries CSV: x, covariates, y, x_prime")
        ->required();
    estimate->add_option("--out", o.out, "Output CSV (default: stdout)");
    estimate->add_option("--kernel", o.kernel, "Kernel family")
        ->check(CLI::IsMember({"gaussian", "epanechnikov"}))
        ->capture_default_str();
    estimate->add_option("--bandwidth", o.bandwidth, "Kernel bandwidth in z")->capture_default_str();
    estimate->add_option("--x-bandwidth", o.x_bandwidth,
                         "Kernel bandwidth in x (continuous treatments)");
    estimate->add_flag("--weighted", o.weighted,
                       "Multiply rows by the kernel-ratio weight K / (sum K / N)");
    estimate->add_flag("--standardize", o.standardize,
                       "Standardize covariates with train statistics");
    add_schema_flags(estimate, o.schema);
    add_propensity_flags(estimate, o.prop);
    estimate->add_option("--threads", o.threads, "Worker threads (0: all cores)");
    estimate->add_flag("--json", o.json_errors, "Print errors as JSON on stderr");

    baseline = app.add_subcommand("baseline", "Quantile-regression baselines");
    baseline->add_option("--method", o.method, "bilevel | fourstep")
        ->check(CLI::IsMember({"bilevel", "fourstep"}))
        ->required();
    baseline->add_option("--dataset", o.dataset, "Dataset CSV (train rows are fitted)")->required();
    baseline->add_option("--queries", o.queries, "Queries CSV: x, covariates, y, x_prime")
        ->required();
    baseline->add_option("--out", o.out, "Output CSV (default: stdout)");
    baseline->add_option("--tau-step", o.tau_step, "Quantile grid step")->capture_default_str();
    baseline->add_option("--quantile-iterations", o.quantile_iterations,
                         "Subgradient iterations per fit")
        ->capture_default_str();
    baseline->add_flag("--standardize", o.standardize,
                       "Standardize covariates with train statistics");
    add_schema_flags(baseline, o.schema);
    add_propensity_flags(baseline, o.prop);
    baseline->add_option("--threads", o.threads, "Worker threads (0: all cores)");
    baseline->add_flag("--json", o.json_errors, "Print errors as JSON on stderr");

    rank_check = app.add_subcommand("rank-check", "Kendall rank correlation of two columns");
    rank_check->add_option("--input", o.input, "CSV file")->required();
    rank_check->add_option("--x-col", o.x_col, "First column (default: column 1)");
    rank_check->add_option("--y-col", o.y_col, "Second column (default: column 2)");
    rank_check->add_flag("--json", o.json_errors, "Print errors as JSON on stderr");

    run = app.add_subcommand("run", "Run an experiment plan");
    run->add_option("--plan", o.plan, "Plan JSON")->required();
    run->add_option("--out", o.out, "Output directory for results.csv and manifest.json "
                                    "(default: CSV on stdout)");
    run->add_option("--threads", o.threads, "Worker threads (0: all cores)");
    add_plan_flags(run, run_overrides);
    run->add_flag("--json", o.json_errors, "Print errors as JSON on stderr");

    sweep_cmd = app.add_subcommand("sweep", "Repeat a plan over values of one axis");
    sweep_cmd->add_option("--plan", o.plan, "Base plan JSON")->required();
    sweep_cmd->add_option("--axis", o.axis, "alpha | bandwidth | kernel | rho | beta")
        ->check(CLI::IsMember({"alpha", "bandwidth", "kernel", "rho", "beta"}))
        ->required();
    sweep_cmd->add_option("--values", o.values, "Comma-separated axis values")->required();
    sweep_cmd->add_option("--out", o.out, "Output directory (default: CSV on stdout)");
    sweep_cmd->add_option("--threads", o.threads, "Worker threads (0: all cores)");
    add_plan_flags(sweep_cmd, sweep_overrides);
    sweep_cmd->add_flag("--json", o.json_errors, "Print errors as JSON on stderr");
  }

  int dispatch(std::ostream& out, std::ostream& err) {
    if (simulate->parsed()) return cmd_simulate(o, out);
    if (estimate->parsed()) return cmd_estimate(o, out, err);
    if (baseline->parsed()) return cmd_baseline(o, out);
    if (rank_check->parsed()) return cmd_rank_check(o, out);
    if (run->parsed()) return cmd_run(o, run_overrides, out, err);
    return cmd_sweep(o, sweep_overrides, out, err);
  }
};

void report(std::ostream& err, bool as_json, const char* kind, const std::string& message) {
  if (as_json) {
    err << json{{"error", kind}, {"message", message}}.dump() << "\n";
  } else {
    err << "error: " << message << "\n";
  }
}

}  // namespace

std::string cli_help() {
  Cli cli;
  return cli.app.help("", CLI::AppFormatMode::All);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli;
  const bool wants_json = std::find(args.begin(), args.end(), "--json") != args.end();
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    cli.app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << cli.app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << cli.app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report(err, wants_json, "usage", e.what());
    if (!wants_json) err << cli.app.help("", CLI::AppFormatMode::All);
    return 1;
  }
  try {
    return cli.dispatch(out, err);
  } catch (const ValidationError& e) {
    report(err, cli.o.json_errors, "validation", e.what());
    return 1;
  } catch (const CoverageError& e) {
    report(err, cli.o.json_errors, "coverage", e.what());
    return 2;
  } catch (const IoError& e) {
    report(err, cli.o.json_errors, "io", e.what());
    return 2;
  } catch (const RuntimeError& e) {
    report(err, cli.o.json_errors, "runtime", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    report(err, cli.o.json_errors, "io", e.what());
    return 2;
  } catch (const std::exception& e) {
    report(err, cli.o.json_errors, "runtime", e.what());
    return 2;
  }
}

}  // namespace rankcf
